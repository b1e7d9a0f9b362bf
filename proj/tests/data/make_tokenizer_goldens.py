"""Regenerates tokenizer_goldens.json with the reference GPT-2 tokenizer.

Usage: python3 tests/data/make_tokenizer_goldens.py
Requires `transformers`; reads vocab.json / merges.txt from data/tokenizer.
"""
import json
import pathlib

from transformers import GPT2Tokenizer

ROOT = pathlib.Path(__file__).resolve().parents[2]

TEXTS = [
    "Hello",
    "Hello world",
    " Hello",
    "  Hello",
    "Hello  world",
    "When Mary and John went to the store, John gave a drink to",
    "When John and Mary went to the store, John gave a drink to",
    "def f(a, b):",
    'def load(x, y, name, value, data):\n    """Load the data.\n\n    :param x: the input\n    :param',
    "I'm sure it's what they'd've wanted, isn't it? We'll see; you're right.",
    "DON'T SHOUT'S",
    "'''quoted'''",
    "rock 'n' roll",
    "12345 678.90 1,000,000",
    "In 2023, 42% of 7.5 billion",
    "tabs\tand\ttabs",
    "line one\nline two\n\nline four",
    "trailing spaces   ",
    "   leading spaces",
    "\n\n\n",
    "   \n   x",
    "a  b   c    d",
    "!!!???...",
    " !!! ",
    "email@example.com",
    "https://example.com/path?q=1&r=2",
    "snake_case_identifier = camelCaseValue + 3",
    "C++ and C# are languages.",
    "naïve café résumé",
    "Ünïcödé letters: ÀÉÎÕÜ",
    "Москва — столица России.",
    "Ελληνικά γράμματα",
    "日本語のテキスト",
    "中文字符测试",
    "한국어 텍스트",
    "العربية نص",
    "emoji 😀😃 and 🚀 rockets",
    "mixed 𝔘𝔫𝔦𝔠𝔬𝔡𝔢 math",
    "ﬁ ligature and ½ fraction and ² superscript",
    "Ⅻ roman numeral and ٣ arabic digit",
    "non breaking space",
    "em space and thin space",
    "zero​width",
    "Call me Ishmael. Some years ago—never mind how long precisely—having little or no money",
    "“curly quotes” and ‘single’",
    "The quick brown fox jumps over the lazy dog.",
    "SELECT * FROM table WHERE id = 7;",
    "<html><body>Hi</body></html>",
    "{\"key\": [1, 2, 3]}",
    "x = y ** 2 // 3",
    "    indented code block",
    "word's words' wordses",
    "It'S capital contraction",
    "a\r\nwindows\r\nnewlines",
    "multiple\n\n\n\nblank lines",
    " ",
    "a",
    "",
    "antidisestablishmentarianism",
    "pneumonoultramicroscopicsilicovolcanoconiosis",
    " Mary",
    " John",
]


def main():
    tok = GPT2Tokenizer.from_pretrained(str(ROOT / "data" / "tokenizer"))
    goldens = [{"text": t, "ids": tok.encode(t)} for t in TEXTS]
    for g in goldens:
        assert tok.decode(g["ids"]) == g["text"], g["text"]
    out = ROOT / "tests" / "data" / "tokenizer_goldens.json"
    out.write_text(json.dumps(goldens, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {len(goldens)} fixtures to {out}")


if __name__ == "__main__":
    main()
