import json
import struct

import numpy as np
import pytest

from conftest import random_real, random_solenoidal
from oldroyd import snapshots as sn
from oldroyd.system import State


@pytest.mark.parametrize("which", ["grid2", "grid3"])
def test_roundtrip(which, request, tmp_path):
    g = request.getfixturevalue(which)
    st = State(g, random_solenoidal(g, seed=1, band=(1, 4)), random_real(g, (g.dim, g.dim), seed=2, band=(1, 4)), 1.25)
    path = sn.write_snapshot(tmp_path / "s.vsf", st, 1e-3, "imex_cn_ab2", {"int_v": 0.5})
    back, meta = sn.read_snapshot(path)
    assert back.grid is g and back.t == 1.25
    assert np.allclose(back.v, st.v, atol=1e-15) and np.allclose(back.E, st.E, atol=1e-15)
    assert meta == {"t": 1.25, "dt": 1e-3, "scheme": "imex_cn_ab2", "time_norms": {"int_v": 0.5}}


def test_header_layout(grid2, tmp_path):
    path = sn.write_snapshot(tmp_path / "s.vsf", State.rest(grid2), 0.1, "etd_ab2")
    raw = path.read_bytes()
    assert raw[:4] == b"VSF1"
    assert struct.unpack_from("<III", raw, 4) == (2, 32, 6)
    assert raw[16:20] == b"f8LE"
    assert len(raw) == 20 + 8 * 6 * 32 * 32
    assert json.loads(sn.sidecar_path(path).read_text())["scheme"] == "etd_ab2"


def test_corrupt_files_rejected(grid2, tmp_path):
    path = sn.write_snapshot(tmp_path / "s.vsf", State.rest(grid2), 0.1, "etd_ab2")
    raw = bytearray(path.read_bytes())
    bad = tmp_path / "bad.vsf"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError, match="not a VSF1"):
        sn.read_snapshot(bad)
    bad.write_bytes(raw[:16] + b"f4LE" + raw[20:])
    with pytest.raises(ValueError, match="sample type"):
        sn.read_snapshot(bad)
    bad.write_bytes(raw[:12] + struct.pack("<I", 5) + raw[16:])
    with pytest.raises(ValueError, match="components"):
        sn.read_snapshot(bad)
    bad.write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="truncated"):
        sn.read_snapshot(bad)
