# Tests for qpkam
