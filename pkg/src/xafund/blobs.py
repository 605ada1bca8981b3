"""Content-addressed blob store for contract attachments.

Documents live off-chain in a shared directory keyed by their sha256; only
the digest goes into contract records.
"""

from __future__ import annotations

import hashlib
import os
from typing import Optional


class BlobStore:
    def __init__(self, directory: str):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)

    def put(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        path = os.path.join(self.directory, digest)
        if not os.path.exists(path):
            with open(path, "wb") as fh:
                fh.write(data)
        return digest

    def get(self, digest: str) -> Optional[bytes]:
        path = os.path.join(self.directory, digest)
        if not os.path.exists(path):
            return None
        with open(path, "rb") as fh:
            return fh.read()

    def has(self, digest: str) -> bool:
        return os.path.exists(os.path.join(self.directory, digest))
