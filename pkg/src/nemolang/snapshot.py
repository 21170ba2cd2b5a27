"""Binary network snapshots for checkpoint/restore.

Layout: an 8-byte magic, a little-endian u32 header length, a UTF-8 JSON
header (areas, supports, winners, RNG stream states, connectome directory),
then one block per connectome of (src id: u64, dst id: u64, weight: f64)
triples sorted by (src, dst), all little-endian.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .dynamics import (
    EXPLICIT,
    AreaParams,
    Connectome,
    Network,
)

MAGIC = b"NEMOSNP1"
_TRIPLE_DTYPE = np.dtype([("src", "<u8"), ("dst", "<u8"), ("w", "<f8")])


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def _restore_rng(state: dict) -> np.random.Generator:
    rng = np.random.default_rng(0)
    if state["bit_generator"] != type(rng.bit_generator).__name__:
        raise ValueError(
            f"snapshot uses RNG {state['bit_generator']!r}, "
            f"this build uses {type(rng.bit_generator).__name__!r}"
        )
    rng.bit_generator.state = state
    return rng


def _triples_block(net: Network, key: tuple[str, str]) -> np.ndarray:
    conn = net.connectomes[key]
    rows, cols = np.nonzero(conn.weights)
    block = np.empty(rows.size, dtype=_TRIPLE_DTYPE)
    block["src"] = net.areas[conn.src_id].support_ids[rows]
    block["dst"] = net.areas[conn.dst_id].support_ids[cols]
    block["w"] = conn.weights[rows, cols]
    order = np.lexsort((block["dst"], block["src"]))
    return block[order]


def save_network(net: Network, path: str | Path) -> None:
    path = Path(path)
    areas = []
    for area_id in sorted(net.areas):
        st = net.areas[area_id]
        pr = st.params
        areas.append(
            {
                "area_id": area_id,
                "n": pr.n,
                "k": pr.k,
                "beta": pr.beta,
                "p": pr.p,
                "backend": st.backend,
                "support_ids": st.support_ids.tolist()
                if st.backend != EXPLICIT
                else None,
                "winners": st.winners.tolist(),
                "recruit_rng": _rng_state(st.recruit_rng),
            }
        )
    conn_dir = []
    blocks = []
    for key in sorted(net.connectomes):
        conn = net.connectomes[key]
        block = _triples_block(net, key)
        conn_dir.append(
            {
                "src": key[0],
                "dst": key[1],
                "p": conn.p,
                "backend": conn.backend,
                "count": int(block.size),
                "fill_rng": _rng_state(conn.fill_rng),
            }
        )
        blocks.append(block)
    header = {
        "version": 1,
        "master_seed": net.master_seed,
        "t": net.t,
        "areas": areas,
        "connectomes": conn_dir,
    }
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(payload)))
        fh.write(payload)
        for block in blocks:
            fh.write(block.tobytes())


def load_network(path: str | Path) -> Network:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a network snapshot")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("version") != 1:
            raise ValueError(f"{path}: unsupported snapshot version")

        net = Network(header["master_seed"])
        net.t = header["t"]
        for spec in header["areas"]:
            params = AreaParams(
                spec["area_id"], spec["n"], spec["k"], spec["beta"], spec["p"]
            )
            st = net.add_area(params, spec["backend"])
            if spec["support_ids"] is not None:
                for nid in spec["support_ids"]:
                    st.add_support(int(nid))
            st.winners = np.asarray(spec["winners"], dtype=np.int64)
            st.recruit_rng = _restore_rng(spec["recruit_rng"])

        for spec in header["connectomes"]:
            src = net.areas[spec["src"]]
            dst = net.areas[spec["dst"]]
            # Build with a throwaway stream (the explicit constructor samples
            # a graph we immediately overwrite), then restore the real state.
            conn = Connectome(
                spec["src"],
                spec["dst"],
                src.params.n,
                dst.params.n,
                spec["p"],
                spec["backend"],
                np.random.default_rng(0),
                src_size=src.support_len,
                dst_size=dst.support_len,
            )
            conn.fill_rng = _restore_rng(spec["fill_rng"])
            if conn.backend == EXPLICIT:
                conn._W[:] = 0.0
            else:
                conn._grow(0, max(conn.src_size, 1))
                conn._grow(1, max(conn.dst_size, 1))
            block = np.frombuffer(
                fh.read(spec["count"] * _TRIPLE_DTYPE.itemsize),
                dtype=_TRIPLE_DTYPE,
            )
            if block.size:
                src_slot = {
                    int(i): s for s, i in enumerate(src.support_ids.tolist())
                }
                dst_slot = {
                    int(i): s for s, i in enumerate(dst.support_ids.tolist())
                }
                rows = np.fromiter(
                    (src_slot[int(i)] for i in block["src"]),
                    dtype=np.int64,
                    count=block.size,
                )
                cols = np.fromiter(
                    (dst_slot[int(i)] for i in block["dst"]),
                    dtype=np.int64,
                    count=block.size,
                )
                conn._W[rows, cols] = block["w"]
            net._register(conn)
    return net
