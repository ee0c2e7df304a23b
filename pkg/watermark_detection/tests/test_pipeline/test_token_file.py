"""Tests for token file reading and writing."""

import pytest

from watermark_detection.exceptions import ContractError
from watermark_detection.pipeline.loaders.token_file import (
    parse_int,
    read_token_file,
    write_token_file,
)


class TestWriteTokenFile:
    def test_header_then_tokens(self, tmp_path):
        path = write_token_file(
            tmp_path / "t.txt", [3, 1, 4], {"salt": 24301, "prompt": [7, 8], "theta": None}
        )
        assert path.read_text() == "# salt: 24301\n# prompt: 7 8\n# theta: None\n3\n1\n4\n"

    def test_read_back(self, tmp_path):
        path = write_token_file(
            tmp_path / "t.txt", [5, 9], {"salt": 7, "delta": 0.3, "prompt": [1, 2, 3]}
        )
        parsed = read_token_file(path)
        assert parsed.tokens == [5, 9]
        assert parsed.get_int("salt") == 7
        assert parsed.get_float("delta") == 0.3
        assert parsed.prompt == [1, 2, 3]


class TestReadTokenFile:
    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("# suspect text\n\n# m: 100\n12\n\n40\n")
        parsed = read_token_file(path)
        assert parsed.tokens == [12, 40]
        assert parsed.get_int("m") == 100
        assert parsed.get_float("theta") is None
        assert parsed.get_int("salt", 5) == 5

    def test_hex_salt(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("# salt: 0x5EED\n1\n")
        assert read_token_file(path).get_int("salt") == 0x5EED

    def test_leading_zero_salt_is_decimal(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("# salt: 0123\n# m: 0100\n1\n")
        parsed = read_token_file(path)
        assert parsed.get_int("salt") == 123
        assert parsed.get_int("m") == 100

    def test_bad_token_names_line(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("# m: 10\n1\nabc\n")
        with pytest.raises(ContractError, match=":3:"):
            read_token_file(path)

    def test_negative_token(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("4\n-2\n")
        with pytest.raises(ContractError, match="negative"):
            read_token_file(path)

    def test_bad_metadata(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("# delta: big\n1\n")
        with pytest.raises(ContractError, match="delta"):
            read_token_file(path)

    def test_no_tokens(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("# salt: 1\n")
        with pytest.raises(ContractError):
            read_token_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            read_token_file(tmp_path / "absent.txt")


class TestParseInt:
    @pytest.mark.parametrize(
        "text,expected",
        [("42", 42), ("0123", 123), ("0x5EED", 0x5EED), ("0XFF", 255), ("-0x10", -16), (" 7 ", 7)],
    )
    def test_values(self, text, expected):
        assert parse_int(text) == expected

    def test_rejects_other_prefixes(self):
        with pytest.raises(ValueError):
            parse_int("0b101")
