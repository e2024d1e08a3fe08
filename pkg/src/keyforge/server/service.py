"""Key server core: domain registry, signing, verification, expiry
publication, and the public-parameter directory with its client-side cache.

The service is transport-agnostic; the RPC and HTTP front ends call into it.
Signing needs no locks (derivation is deterministic and caches are
per-domain), and the expiry publisher is the only writer of the publication
stream.
"""

from __future__ import annotations

import base64
import json
import os
import threading
import time
from dataclasses import dataclass, field

from .. import ffs, group, pipeline, protocol, sig, tagtree
from ..errors import KeyForgeError, RpcError, SpanError
from ..ffs import ExpiryInfo, KeyCache
from ..hibs import CertCache, HibsSignature
from ..protocol import KeyForgeConfig, KeyForgeSignature
from ..tagtree import TagSpace

ERR_UNKNOWN_DOMAIN = -32001
ERR_SPAN = -32002
ERR_FORGE_REQUEST = -32003
ERR_BAD_PARAMS = -32602


def space_from_config(cfg: dict) -> TagSpace:
    layout = cfg.get("layout", "uniform")
    policy = tuple(cfg.get("policy_levels", ()))
    if layout == "uniform":
        return tagtree.uniform_layout(
            leaf_target=int(cfg["leaf_target"]),
            depth=int(cfg["depth"]),
            epoch_start=int(cfg.get("epoch_start", 0)),
            chunk_duration=int(cfg.get("chunk_seconds", tagtree.DEFAULT_CHUNK_SECONDS)),
            policy_levels=policy,
        )
    if layout == "calendar":
        return tagtree.calendar_layout(
            start_year=int(cfg["start_year"]),
            years=int(cfg.get("years", 2)),
            chunks_per_day=int(cfg.get("chunks_per_day", tagtree.DEFAULT_CHUNKS_PER_DAY)),
            policy_levels=policy,
        )
    raise KeyForgeError(f"unknown layout {layout!r}")


def space_to_config(space: TagSpace) -> dict:
    if space.layout == "uniform":
        return {
            "layout": "uniform",
            "leaf_target": space.branching ** space.time_levels,
            "depth": space.time_levels,
            "epoch_start": space.epoch_start,
            "chunk_seconds": space.chunk_duration,
            "policy_levels": list(space.policy_levels),
        }
    from datetime import datetime, timezone

    return {
        "layout": "calendar",
        "start_year": datetime.fromtimestamp(space.epoch_start, tz=timezone.utc).year,
        "years": space.levels[0].cardinality,
        "chunks_per_day": space.chunks_per_day,
        "policy_levels": list(space.policy_levels),
    }


@dataclass
class DomainContext:
    """Everything the server holds for one signing domain."""

    domain: str
    keypair: ffs.FfsKeyPair
    request_keys: sig.SigKeyPair
    cfg: KeyForgeConfig
    generation: int = 1
    key_cache: KeyCache = field(default_factory=lambda: KeyCache(8192))
    cert_cache: CertCache = field(default_factory=lambda: CertCache(65536))


@dataclass
class ParamRecord:
    """Public parameters for one domain prefix, cacheable by verifiers.

    The root record (empty prefix) carries the verification key and the
    request-signing key; prefix records additionally carry the certified
    chain down to the prefix so a verifier can pre-seed its certificate
    cache and check any leaf under the prefix offline.
    """

    domain: str
    prefix: str
    generation: int
    mvk_b64: str
    request_pk_b64: str
    chain: list[dict]
    space_config: dict = field(default_factory=dict)
    fetched_at: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "domain": self.domain,
                "prefix": self.prefix,
                "generation": self.generation,
                "mvk": self.mvk_b64,
                "request_pk": self.request_pk_b64,
                "chain": self.chain,
                "space": self.space_config,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, raw: str | bytes) -> "ParamRecord":
        data = json.loads(raw)
        return cls(
            domain=data["domain"],
            prefix=data["prefix"],
            generation=data["generation"],
            mvk_b64=data["mvk"],
            request_pk_b64=data["request_pk"],
            chain=data["chain"],
            space_config=data.get("space", {}),
        )

    def space(self) -> TagSpace:
        return space_from_config(self.space_config)

    def mvk(self) -> int:
        return group.decode_element(base64.b64decode(self.mvk_b64))

    def request_pk(self) -> int:
        return group.decode_element(base64.b64decode(self.request_pk_b64))


class ParamCache:
    """Domain -> fetched root ParamRecord; a hit never touches the directory."""

    def __init__(self, fetch, clock=None):
        self._fetch = fetch
        self._clock = clock or (lambda: int(time.time()))
        self._records: dict[str, ParamRecord] = {}
        self.fetch_count = 0

    def resolve(self, domain: str) -> ParamRecord | None:
        record = self._records.get(domain)
        if record is not None:
            return record
        self.fetch_count += 1
        record = self._fetch(domain)
        if record is not None:
            record.fetched_at = int(self._clock())
            self._records[domain] = record
        return record

    def resolve_vk(self, domain: str) -> int | None:
        record = self.resolve(domain)
        return None if record is None else record.mvk()

    def invalidate(self, domain: str | None = None) -> None:
        if domain is None:
            self._records.clear()
        else:
            self._records.pop(domain, None)


class KeyServerService:
    """One process serving any number of local signing domains."""

    def __init__(self, public_dir: str, clock=None):
        self.public_dir = public_dir
        self.clock = clock or (lambda: int(time.time()))
        self.domains: dict[str, DomainContext] = {}
        self.param_cache = ParamCache(self._fetch_param_record, clock=self.clock)
        self._publish_lock = threading.Lock()

    # -- registry ------------------------------------------------------------

    def register_domain(
        self,
        domain: str,
        seed: bytes,
        request_seed: bytes,
        space: TagSpace,
        delta_hat: int = protocol.DEFAULT_DELTA_HAT,
        expiry_interval: int = 0,
        max_depth: int = 8,
        generation: int = 1,
    ) -> DomainContext:
        keypair = ffs.ffs_keygen(seed, max_depth=max_depth)
        cfg = KeyForgeConfig(
            space=space, domain=domain, delta_hat=delta_hat,
            expiry_interval=expiry_interval, clock=self.clock,
        )
        ctx = DomainContext(
            domain=domain,
            keypair=keypair,
            request_keys=sig.sig_keygen(request_seed),
            cfg=cfg,
            generation=generation,
        )
        self.domains[domain] = ctx
        self.param_cache.invalidate(domain)
        return ctx

    def _ctx(self, domain: str) -> DomainContext:
        ctx = self.domains.get(domain)
        if ctx is None:
            raise RpcError(ERR_UNKNOWN_DOMAIN, f"domain {domain!r} is not served here")
        return ctx

    # -- signing ---------------------------------------------------------------

    def sign(self, domain: str, digest: bytes, tag_text: str | None = None
             ) -> KeyForgeSignature:
        """Sign a 32-byte digest under the given (or clock-derived) tag.

        A caller-supplied tag must be the live or next chunk by the server's
        clock; anything older or farther out is refused so the interface
        cannot mint back- or future-dated signatures.
        """
        ctx = self._ctx(domain)
        if len(digest) != 32:
            raise RpcError(ERR_BAD_PARAMS, "digest must be 32 bytes")
        now = ctx.cfg.now()
        if tag_text is None:
            tag = None
        else:
            try:
                tag = tagtree.parse_tag_text(tag_text, ctx.cfg.space)
            except KeyForgeError as exc:
                raise RpcError(ERR_BAD_PARAMS, f"bad tag: {exc}") from None
            allowed = {
                ctx.cfg.space.tag_of_time(now),
                ctx.cfg.space.tag_of_time(min(now + ctx.cfg.delta_hat,
                                              ctx.cfg.space.span()[1] - 1)),
            }
            if tag[: ctx.cfg.space.time_levels] not in allowed:
                raise RpcError(ERR_BAD_PARAMS, "tag is not current")
        try:
            return protocol.kf_sign(ctx.keypair.sk, digest, ctx.cfg,
                                    cache=ctx.key_cache, tag=tag)
        except SpanError as exc:
            raise RpcError(ERR_SPAN, str(exc)) from None

    # -- verification ------------------------------------------------------------

    def verify(
        self,
        domain: str,
        digest: bytes,
        tag_text: str,
        signature: HibsSignature,
        now: int | None = None,
    ) -> tuple[bool, str | None]:
        """(ok, reason); parameter-resolution failures are distinct from
        signature failures."""
        local = self.domains.get(domain)
        if local is not None:
            vk = local.keypair.vk
            space = local.cfg.space
            cert_cache = local.cert_cache
        else:
            record = self.param_cache.resolve(domain)
            if record is None:
                return False, pipeline.REASON_UNKNOWN_DOMAIN
            try:
                vk = record.mvk()
                space = record.space()
            except (KeyForgeError, KeyError, ValueError):
                return False, pipeline.REASON_UNKNOWN_DOMAIN
            cert_cache = None
        try:
            tag = tagtree.parse_tag_text(tag_text, space)
        except KeyForgeError:
            return False, pipeline.REASON_BAD_SIGNATURE
        if now is None:
            now = int(self.clock())
        if not protocol.tag_is_live(space, tag, now):
            return False, pipeline.REASON_TAG_EXPIRED
        identity = tagtree.tag_to_identity(tag)
        if not ffs.ffs_verify(vk, identity, digest, signature, cert_cache):
            return False, pipeline.REASON_BAD_SIGNATURE
        return True, None

    # -- forge-on-request -----------------------------------------------------------

    def forge_request(self, domain: str, request: pipeline.ForgeRequest
                      ) -> pipeline.ForgeResponse:
        ctx = self._ctx(domain)
        return pipeline.forge_on_request(
            ctx.keypair.sk, request, ctx.cfg,
            resolve_request_pk=self._resolve_request_pk,
            cache=ctx.key_cache,
        )

    def _resolve_request_pk(self, domain: str) -> int | None:
        local = self.domains.get(domain)
        if local is not None:
            return local.request_keys.pk
        record = self.param_cache.resolve(domain)
        return None if record is None else record.request_pk()

    # -- expiry publication -----------------------------------------------------------

    def _expiry_dir(self, domain: str) -> str:
        return os.path.join(self.public_dir, "expiry", domain)

    def publish_expiry(self, domain: str, now: int | None = None) -> str | None:
        """Write the cumulative expiry file for every fully ended chunk.

        The file is named by the count of expired leaves (the publication
        chunk index); nothing is written when no new chunk has completed.
        Returns the path written, or None.
        """
        ctx = self._ctx(domain)
        if now is None:
            now = ctx.cfg.now()
        with self._publish_lock:
            k = protocol.expired_leaf_count(ctx.cfg, now)
            if k == 0:
                return None
            directory = self._expiry_dir(domain)
            os.makedirs(directory, exist_ok=True)
            path = os.path.join(directory, f"{k:010d}.kfe")
            if os.path.exists(path):
                return None
            info = ffs.expire_prefix(ctx.keypair.sk, ctx.cfg.space, k - 1, ctx.key_cache)
            tmp = path + ".tmp"
            with open(tmp, "wb") as fh:
                fh.write(info.serialize())
            os.replace(tmp, path)
            return path

    def latest_expiry(self, domain: str) -> ExpiryInfo | None:
        directory = self._expiry_dir(domain)
        if not os.path.isdir(directory):
            return None
        names = sorted(n for n in os.listdir(directory) if n.endswith(".kfe"))
        if not names:
            return None
        with open(os.path.join(directory, names[-1]), "rb") as fh:
            return ExpiryInfo.deserialize(fh.read())

    def expiry_file(self, domain: str, index: int) -> bytes | None:
        path = os.path.join(self._expiry_dir(domain), f"{index:010d}.kfe")
        if not os.path.exists(path):
            return None
        with open(path, "rb") as fh:
            return fh.read()

    # -- public parameters ---------------------------------------------------------

    def serve_params(self, domain: str, prefix: str = "") -> ParamRecord:
        """Parameters for a prefix: the vk plus the certified chain to it."""
        ctx = self._ctx(domain)
        chain: list[dict] = []
        if prefix:
            try:
                tag = tagtree.parse_tag_text(prefix, ctx.cfg.space)
            except KeyForgeError as exc:
                raise RpcError(ERR_BAD_PARAMS, f"bad prefix: {exc}") from None
            identity = tagtree.tag_to_identity(tag)
            key = ffs.derive_key(ctx.keypair.sk, identity, ctx.key_cache)
            chain = [
                {"pk": base64.b64encode(group.encode_element(link.level_pk)).decode(),
                 "cert": base64.b64encode(link.cert.encode()).decode()}
                for link in key.chain
            ]
        return ParamRecord(
            domain=domain,
            prefix=prefix,
            generation=ctx.generation,
            mvk_b64=base64.b64encode(group.encode_element(ctx.keypair.vk)).decode(),
            request_pk_b64=base64.b64encode(group.encode_element(ctx.request_keys.pk)).decode(),
            chain=chain,
            space_config=space_to_config(ctx.cfg.space),
        )

    def write_params(self, domain: str) -> str:
        """Publish the root parameter record into the public directory."""
        record = self.serve_params(domain)
        directory = os.path.join(self.public_dir, "params", domain)
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, "root.json")
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(record.to_json())
        os.replace(tmp, path)
        return path

    def _fetch_param_record(self, domain: str) -> ParamRecord | None:
        """Default directory lookup: the local public dir (stands in for DNS)."""
        path = os.path.join(self.public_dir, "params", domain, "root.json")
        if not os.path.exists(path):
            return None
        with open(path, "r", encoding="utf-8") as fh:
            return ParamRecord.from_json(fh.read())

    # -- background publisher ------------------------------------------------------

    def run_publisher(self, stop: threading.Event, poll_seconds: float = 1.0) -> None:
        """Single-writer loop publishing due expiry info for all domains."""
        while not stop.is_set():
            for domain in list(self.domains):
                try:
                    self.publish_expiry(domain)
                except KeyForgeError:
                    pass  # publication retries next tick
            stop.wait(poll_seconds)
