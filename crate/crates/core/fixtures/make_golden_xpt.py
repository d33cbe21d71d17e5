"""Writes golden.xpt: one member, SEQN and LBXGLU, three rows.

Standalone reference writer following the public XPORT v5 layout; the result
is checked with pandas.read_sas before being saved.
"""
import struct
import sys
from pathlib import Path

STAMP = b"01JAN20:00:00:00"


def card(text: bytes) -> bytes:
    assert len(text) <= 80
    return text.ljust(80, b" ")


def ibm(value):
    if value is None:
        return b"." + b"\x00" * 7
    if value == 0:
        return b"\x00" * 8
    sign = 0x80 if value < 0 else 0
    v = abs(value)
    exp = 64
    while v >= 1:
        v /= 16
        exp += 1
    while v < 1 / 16:
        v *= 16
        exp -= 1
    mant = int(round(v * 16**14))
    return bytes([sign | exp]) + mant.to_bytes(7, "big")


def namestr(name: bytes, varnum: int, pos: int) -> bytes:
    out = struct.pack(">hhhh", 1, 0, 8, varnum)
    out += name.ljust(8) + b" " * 40 + b" " * 8
    out += struct.pack(">hhh", 0, 0, 0) + b"\x00\x00"
    out += b" " * 8 + struct.pack(">hh", 0, 0) + struct.pack(">i", pos)
    out += b"\x00" * 52
    assert len(out) == 140
    return out


def build(rows):
    out = card(b"HEADER RECORD*******LIBRARY HEADER RECORD!!!!!!!" + b"0" * 30)
    out += card(b"SAS     SAS     SASLIB  9.1     Linux   " + b" " * 24 + STAMP)
    out += card(STAMP)
    out += card(b"HEADER RECORD*******MEMBER  HEADER RECORD!!!!!!!000000000000000001600000000140")
    out += card(b"HEADER RECORD*******DSCRPTR HEADER RECORD!!!!!!!" + b"0" * 30)
    out += card(b"SAS     GLU     SASDATA 9.1     Linux   " + b" " * 24 + STAMP)
    out += card(STAMP + b" " * 16 + b"Glucose".ljust(40) + b" " * 8)
    out += card(b"HEADER RECORD*******NAMESTR HEADER RECORD!!!!!!!000000000200000000000000000000")
    names = namestr(b"SEQN", 1, 0) + namestr(b"LBXGLU", 2, 8)
    names += b" " * (-len(names) % 80)
    out += names
    out += card(b"HEADER RECORD*******OBS     HEADER RECORD!!!!!!!" + b"0" * 30)
    obs = b"".join(ibm(a) + ibm(b) for a, b in rows)
    obs += b" " * (-len(obs) % 80)
    return out + obs


ROWS = [(41475.0, 95.0), (41476.0, None), (41477.0, 126.5)]

if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).with_name("golden.xpt")
    data = build(ROWS)
    target.write_bytes(data)
    import math
    import pandas as pd

    df = pd.read_sas(str(target), format="xport")
    assert list(df.columns) == ["SEQN", "LBXGLU"], df.columns
    assert df["SEQN"].tolist() == [41475.0, 41476.0, 41477.0]
    glu = df["LBXGLU"].tolist()
    assert glu[0] == 95.0 and math.isnan(glu[1]) and glu[2] == 126.5
    print(f"wrote {target} ({len(data)} bytes), pandas check ok")
