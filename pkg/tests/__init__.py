# Tests for meander-nfc
