"""Tests for SQGF1 field persistence."""
import struct

import numpy as np
import pytest

from sqglab import field_from_modes, make_grid, read_field, to_physical, write_field
from sqglab.io import MAGIC, VERSION

HEADER = struct.Struct("<4sIIId8x")


def sample_field(grid):
    return field_from_modes(grid, {(1, 0): -0.5j, (3, 2): 0.25 + 0.1j, (0, 4): 0.3j})


class TestHeader:
    """The fixed 32-byte header."""

    def test_layout(self, tmp_path):
        """Magic, version, K, representation tag, and L are packed in order."""
        g = make_grid(32, 1.5)
        p = tmp_path / "u.sqgf"
        write_field(p, sample_field(g))
        raw = p.read_bytes()
        magic, version, K, tag, L = HEADER.unpack_from(raw)
        assert magic == MAGIC == b"SQGF"
        assert version == VERSION == 1
        assert K == 32
        assert tag == 0
        assert L == 1.5
        assert len(raw) == HEADER.size + 32 * 32 * 16

    def test_physical_tag_and_size(self, tmp_path):
        """Physical payloads carry tag 1 and 8-byte samples."""
        g = make_grid(32, np.pi)
        p = tmp_path / "u.sqgf"
        write_field(p, sample_field(g), representation="physical")
        raw = p.read_bytes()
        _, _, _, tag, _ = HEADER.unpack_from(raw)
        assert tag == 1
        assert len(raw) == HEADER.size + 32 * 32 * 8


class TestRoundTrip:
    """Write-then-read identity."""

    def test_spectral_exact(self, tmp_path):
        """Spectral round trips are bit-exact."""
        g = make_grid(32, np.pi)
        u = sample_field(g)
        p = tmp_path / "u.sqgf"
        write_field(p, u)
        back = read_field(p)
        np.testing.assert_array_equal(back.coeffs, u.coeffs)
        assert back.grid == g

    def test_physical_close(self, tmp_path):
        """Physical round trips reproduce the field to near machine precision."""
        g = make_grid(64, 2 * np.pi)
        rng = np.random.default_rng(19)
        samples = rng.standard_normal((64, 64))
        from sqglab import field_from_physical

        u = field_from_physical(g, samples - samples.mean())
        p = tmp_path / "u.sqgf"
        write_field(p, u, representation="physical")
        back = read_field(p)
        np.testing.assert_allclose(to_physical(back), to_physical(u), atol=1e-12)

    def test_dealias_flag_rederived(self, tmp_path):
        """The dealias flag comes from the payload content, not the file."""
        g = make_grid(32, np.pi)
        p = tmp_path / "u.sqgf"
        write_field(p, field_from_modes(g, {(2, 0): 0.5}))
        assert read_field(p).is_dealiased
        hot = field_from_modes(g, {(g.dealias_index + 1, 0): 0.5})
        write_field(p, hot)
        assert not read_field(p).is_dealiased

    def test_custom_dealias_fraction(self, tmp_path):
        """The reader applies the caller's dealias fraction to the new grid."""
        g = make_grid(32, np.pi)
        p = tmp_path / "u.sqgf"
        write_field(p, sample_field(g))
        back = read_field(p, dealias_fraction=0.5)
        assert back.grid.dealias_index == 8


class TestRejection:
    """Malformed files and arguments."""

    def test_bad_magic(self, tmp_path):
        """Foreign files are refused by their magic."""
        p = tmp_path / "u.sqgf"
        p.write_bytes(b"NOPE" + bytes(HEADER.size - 4))
        with pytest.raises(ValueError, match="magic"):
            read_field(p)

    def test_truncated_header(self, tmp_path):
        """Files shorter than the header are refused."""
        p = tmp_path / "u.sqgf"
        p.write_bytes(b"SQGF\x01")
        with pytest.raises(ValueError, match="truncated"):
            read_field(p)

    def test_wrong_version(self, tmp_path):
        """Future versions are refused rather than misread."""
        p = tmp_path / "u.sqgf"
        p.write_bytes(HEADER.pack(MAGIC, 99, 32, 0, np.pi))
        with pytest.raises(ValueError, match="version"):
            read_field(p)

    def test_payload_size_mismatch(self, tmp_path):
        """A short payload is refused."""
        g = make_grid(32, np.pi)
        p = tmp_path / "u.sqgf"
        write_field(p, sample_field(g))
        p.write_bytes(p.read_bytes()[:-16])
        with pytest.raises(ValueError, match="payload"):
            read_field(p)

    def test_unknown_tag(self, tmp_path):
        """Unknown representation tags are refused."""
        p = tmp_path / "u.sqgf"
        body = np.zeros(32 * 32, dtype="<f8").tobytes()
        p.write_bytes(HEADER.pack(MAGIC, VERSION, 32, 7, np.pi) + body)
        with pytest.raises(ValueError, match="tag"):
            read_field(p)

    def test_unknown_representation_on_write(self, tmp_path):
        """Only spectral and physical writes exist."""
        g = make_grid(32, np.pi)
        with pytest.raises(ValueError, match="representation"):
            write_field(tmp_path / "u.sqgf", sample_field(g), representation="wavelet")
