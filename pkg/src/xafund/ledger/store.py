"""Append-only on-disk chain store.

Byte layout of ``<chain>.log`` (documented so tamper tests can target
specific bytes):

    record   := length | body
    length   := 4-byte big-endian unsigned int, byte count of body
    body     := canonical JSON encoding of one block, UTF-8

Records are concatenated in height order starting at height 0.  The sidecar
``<chain>.idx`` holds one JSON line per record: {"height", "offset", "length"}
where offset is the file position of the length prefix.  The index is derived
data; verification reads the log sequentially and never trusts the index.
"""

from __future__ import annotations

import json
import os
import struct
from typing import Iterator, List, Optional, Tuple

from ..canonical import canonical_bytes

_LEN = struct.Struct(">I")


class ChainStore:
    def __init__(self, directory: str, chain_id: str):
        self.chain_id = chain_id
        self.log_path = os.path.join(directory, f"{chain_id}.log")
        self.idx_path = os.path.join(directory, f"{chain_id}.idx")
        os.makedirs(directory, exist_ok=True)
        if not os.path.exists(self.log_path):
            open(self.log_path, "wb").close()
            open(self.idx_path, "w").close()

    def append(self, block: dict) -> None:
        body = canonical_bytes(block)
        offset = os.path.getsize(self.log_path)
        with open(self.log_path, "ab") as fh:
            fh.write(_LEN.pack(len(body)))
            fh.write(body)
        with open(self.idx_path, "a", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {
                        "height": block["header"]["height"],
                        "offset": offset,
                        "length": len(body),
                    }
                )
                + "\n"
            )

    def read_index(self) -> List[dict]:
        entries = []
        with open(self.idx_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    entries.append(json.loads(line))
        return entries

    def iter_records(self) -> Iterator[Tuple[int, Optional[dict], Optional[str]]]:
        """Yield (position, block_or_None, error_or_None) sequentially.

        Any structural damage (short read, bad length, undecodable JSON)
        surfaces as an error for that record position; iteration stops there
        because record boundaries past a damaged length prefix are unknown.
        """
        position = 0
        with open(self.log_path, "rb") as fh:
            while True:
                prefix = fh.read(4)
                if not prefix:
                    return
                if len(prefix) < 4:
                    yield position, None, "truncated length prefix"
                    return
                (length,) = _LEN.unpack(prefix)
                body = fh.read(length)
                if len(body) < length:
                    yield position, None, "truncated record body"
                    return
                try:
                    block = json.loads(body.decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                    yield position, None, f"undecodable block: {exc}"
                    position += 1
                    continue
                yield position, block, None
                position += 1

    def read_blocks(self) -> List[dict]:
        blocks = []
        for _, block, error in self.iter_records():
            if error is not None:
                raise ValueError(f"{self.chain_id}: {error}")
            blocks.append(block)
        return blocks

    def block_count(self) -> int:
        return len(self.read_index())

    def block_byte_range(self, height: int) -> Tuple[int, int]:
        """(offset, length) of the body bytes for a block, from the index."""
        for entry in self.read_index():
            if entry["height"] == height:
                return entry["offset"] + 4, entry["length"]
        raise KeyError(height)

    # -- raw manipulation hooks (tests and audits only) -----------------------

    def flip_byte(self, file_offset: int, xor: int = 0x01) -> None:
        with open(self.log_path, "r+b") as fh:
            fh.seek(file_offset)
            byte = fh.read(1)
            fh.seek(file_offset)
            fh.write(bytes([byte[0] ^ xor]))

    def rewrite(self, blocks: List[dict]) -> None:
        """Replace the whole log with the given block list (raw-store hook)."""
        os.unlink(self.log_path)
        os.unlink(self.idx_path)
        open(self.log_path, "wb").close()
        open(self.idx_path, "w").close()
        for block in blocks:
            self.append(block)
