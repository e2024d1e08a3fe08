"""Encrypted-at-rest domain key store.

The store is a JSON document (domain -> key seeds) sealed with Fernet under
a key stretched from a startup passphrase (PBKDF2-HMAC-SHA256, per-file
random salt).  Master keys are kept as seeds and re-derived on load, so the
file stays small and rotation is just replacing a seed; superseded seeds are
archived in the file for operators who need to inspect an old span.
"""

from __future__ import annotations

import base64
import json
import os
import secrets
import time

from cryptography.fernet import Fernet, InvalidToken
from cryptography.hazmat.primitives.hashes import SHA256
from cryptography.hazmat.primitives.kdf.pbkdf2 import PBKDF2HMAC

from ..errors import StorageError

_SALT_LEN = 16
_KDF_ITERATIONS = 600_000


def _fernet(passphrase: str, salt: bytes) -> Fernet:
    kdf = PBKDF2HMAC(algorithm=SHA256(), length=32, salt=salt, iterations=_KDF_ITERATIONS)
    return Fernet(base64.urlsafe_b64encode(kdf.derive(passphrase.encode("utf-8"))))


class KeyStore:
    """Domain -> {seed, request_seed, max_depth, generation, archived[]}."""

    def __init__(self, path: str, passphrase: str):
        self.path = path
        self._passphrase = passphrase
        self.domains: dict[str, dict] = {}
        if os.path.exists(path):
            self._load()

    def _load(self) -> None:
        with open(self.path, "rb") as fh:
            raw = fh.read()
        if len(raw) < _SALT_LEN:
            raise StorageError(f"key store {self.path} is truncated")
        try:
            data = _fernet(self._passphrase, raw[:_SALT_LEN]).decrypt(raw[_SALT_LEN:])
        except InvalidToken:
            raise StorageError("key store passphrase is wrong or file is corrupt") from None
        self.domains = json.loads(data.decode("utf-8"))

    def save(self) -> None:
        salt = secrets.token_bytes(_SALT_LEN)
        token = _fernet(self._passphrase, salt).encrypt(
            json.dumps(self.domains, sort_keys=True).encode("utf-8")
        )
        tmp = self.path + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(salt + token)
        os.replace(tmp, self.path)

    def ensure_domain(self, domain: str, max_depth: int = 8) -> dict:
        entry = self.domains.get(domain)
        if entry is None:
            entry = {
                "seed": secrets.token_bytes(32).hex(),
                "request_seed": secrets.token_bytes(32).hex(),
                "max_depth": max_depth,
                "generation": 1,
                "created_at": int(time.time()),
                "archived": [],
            }
            self.domains[domain] = entry
        return entry

    def rotate(self, domain: str) -> dict:
        """Start a fresh key generation; the old seed is archived, not lost."""
        entry = self.domains.get(domain)
        if entry is None:
            raise StorageError(f"domain {domain} not in key store")
        entry["archived"].append({"seed": entry["seed"], "generation": entry["generation"],
                                  "retired_at": int(time.time())})
        entry["seed"] = secrets.token_bytes(32).hex()
        entry["generation"] += 1
        return entry
