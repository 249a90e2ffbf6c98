"""End-to-end request/response protocol between the user and the cloud.

Phase 1 (attestation) is simulated: both ends simply receive the session
key and the cloud's signing keypair.  Requests and responses are sealed
with an AEAD; the attestation enclave signs ``Result || hash_cloud``.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM, ChaCha20Poly1305

from .digest import NONCE_SIZE
from .entropy import Rng, make_rng
from .errors import AttestationFailed, DecryptFailure, UnknownRequest
from .plan import ExecutionPlan
from .runtime import ChannelTap, ExecutionResult, FunctionRegistry, execute_plan
from .verifier import Verdict, compute_user_hash, verify

KEY_SIZE = 32
AEAD_NONCE_SIZE = 12

CIPHERSUITES = {
    "aes-256-gcm": AESGCM,
    "chacha20-poly1305": ChaCha20Poly1305,
}
DEFAULT_CIPHERSUITE = "aes-256-gcm"

Scheduler = Callable[[ExecutionPlan], ExecutionPlan]


@dataclass
class Session:
    session_key: bytes
    cloud_sign_key: Ed25519PrivateKey
    user_verify_key: Ed25519PublicKey
    rng: Rng
    ciphersuite: str = DEFAULT_CIPHERSUITE
    seen_nonces: set = field(default_factory=set)
    # tallies of the attestation/crypto events, keyed by operation name
    events: Counter = field(default_factory=Counter)

    def _aead(self):
        return CIPHERSUITES[self.ciphersuite](self.session_key)

    def seal(self, plaintext: bytes, event: str) -> bytes:
        self.events[event] += 1
        nonce = self.rng.randbytes(AEAD_NONCE_SIZE)
        return nonce + self._aead().encrypt(nonce, plaintext, None)

    def open(self, blob: bytes, event: str) -> bytes:
        self.events[event] += 1
        if len(blob) < AEAD_NONCE_SIZE:
            raise DecryptFailure("ciphertext too short")
        try:
            return self._aead().decrypt(blob[:AEAD_NONCE_SIZE], blob[AEAD_NONCE_SIZE:], None)
        except InvalidTag:
            raise DecryptFailure("authentication tag mismatch") from None


@dataclass(frozen=True)
class RequestEnvelope:
    ciphertext: bytes


@dataclass(frozen=True)
class ResponseEnvelope:
    ciphertext: bytes


def encode_fields(*fields: bytes) -> bytes:
    return b"".join(struct.pack(">I", len(f)) + f for f in fields)


def decode_fields(blob: bytes, count: int) -> list[bytes]:
    out, pos = [], 0
    for _ in range(count):
        if pos + 4 > len(blob):
            raise DecryptFailure("truncated plaintext")
        (n,) = struct.unpack_from(">I", blob, pos)
        pos += 4
        if pos + n > len(blob):
            raise DecryptFailure("truncated plaintext")
        out.append(blob[pos : pos + n])
        pos += n
    if pos != len(blob):
        raise DecryptFailure("trailing octets in plaintext")
    return out


def establish_session(
    rng: Optional[Rng] = None, *, attestation_ok: bool = True, ciphersuite: str = DEFAULT_CIPHERSUITE
) -> Session:
    """Simulated remote attestation followed by key establishment."""
    if not attestation_ok:
        raise AttestationFailed("remote attestation of the cloud enclave was refused")
    if ciphersuite not in CIPHERSUITES:
        raise ValueError(f"unknown ciphersuite {ciphersuite!r}")
    rng = rng or make_rng()
    session_key = rng.randbytes(KEY_SIZE)
    sk = Ed25519PrivateKey.from_private_bytes(rng.randbytes(32))
    session = Session(session_key, sk, sk.public_key(), rng, ciphersuite)
    session.events["RA_sgx"] += 1
    return session


def fresh_nonce(session: Session) -> bytes:
    while True:
        r = session.rng.randbytes(NONCE_SIZE)
        if r not in session.seen_nonces:
            session.seen_nonces.add(r)
            return r


def build_request(
    session: Session, data: bytes, request_id: str, plans: Mapping[str, ExecutionPlan]
) -> tuple[RequestEnvelope, bytes]:
    if request_id not in plans:
        raise UnknownRequest(f"no execution plan registered for request {request_id!r}")
    r = fresh_nonce(session)
    plaintext = encode_fields(bytes(data), request_id.encode(), r)
    return RequestEnvelope(session.seal(plaintext, "Enc")), r


def open_request(session: Session, env: RequestEnvelope) -> tuple[bytes, str, bytes]:
    data, request_id, r = decode_fields(session.open(env.ciphertext, "Dec_sgx"), 3)
    return data, request_id.decode(), r


def seal_response(session: Session, result: bytes, hash_cloud: bytes, sig: bytes) -> ResponseEnvelope:
    return ResponseEnvelope(session.seal(encode_fields(result, bytes(hash_cloud), sig), "Enc_sgx"))


def open_response(session: Session, env: ResponseEnvelope) -> tuple[bytes, bytes, bytes]:
    result, hash_cloud, sig = decode_fields(session.open(env.ciphertext, "Dec"), 3)
    return result, hash_cloud, sig


def sign_response(session: Session, result: bytes, hash_cloud: bytes) -> bytes:
    session.events["Sig_sgx"] += 1
    return session.cloud_sign_key.sign(result + bytes(hash_cloud))


def signature_ok(session: Session, result: bytes, hash_cloud: bytes, sig: bytes) -> bool:
    session.events["Ver_sgx"] += 1
    try:
        session.user_verify_key.verify(sig, result + bytes(hash_cloud))
    except InvalidSignature:
        return False
    return True


def cloud_handle(
    session: Session,
    env: RequestEnvelope,
    plans: Mapping[str, ExecutionPlan],
    functions: FunctionRegistry,
    tap: Optional[ChannelTap] = None,
    scheduler: Optional[Scheduler] = None,
    *,
    run_log: Optional[list] = None,
) -> ResponseEnvelope:
    """Cloud side: decrypt, execute, sign, encrypt.

    ``scheduler`` stands for the untrusted code that turns the request into
    ECall invocations; an attacker may substitute the plan it actually runs.
    The :class:`ExecutionResult` is appended to ``run_log`` when given.
    """
    data, request_id, r = open_request(session, env)
    if request_id not in plans:
        raise UnknownRequest(f"no execution plan registered for request {request_id!r}")
    plan = plans[request_id]
    if scheduler is not None:
        plan = scheduler(plan)
    run: ExecutionResult = execute_plan(plan, data, r, functions, tap)
    session.events["LA_sgx"] += sum(1 for u, v in plan.edges if plan.is_cross(u, v))
    if run_log is not None:
        run_log.append(run)
    sig = sign_response(session, run.result, run.hash_cloud)
    return seal_response(session, run.result, run.hash_cloud, sig)


def user_receive(session: Session, plan: ExecutionPlan, r: bytes, env: ResponseEnvelope) -> Verdict:
    result, hash_cloud, sig = open_response(session, env)
    sig_ok = signature_ok(session, result, hash_cloud, sig)
    expected = compute_user_hash(plan, r).hash_user
    return verify(expected, hash_cloud, sig_ok, result)


@dataclass
class Exchange:
    verdict: Verdict
    request: RequestEnvelope
    response: ResponseEnvelope
    nonce: bytes
    run: Optional[ExecutionResult]


def round_trip(
    session: Session,
    plan: ExecutionPlan,
    data: bytes,
    request_id: str,
    functions: FunctionRegistry,
    tap: Optional[ChannelTap] = None,
    scheduler: Optional[Scheduler] = None,
) -> Exchange:
    """Phases 2-4 for one request against the plan the user expects."""
    plans = {request_id: plan}
    request, r = build_request(session, data, request_id, plans)
    log: list = []
    response = cloud_handle(session, request, plans, functions, tap, scheduler, run_log=log)
    verdict = user_receive(session, plan, r, response)
    return Exchange(verdict, request, response, r, log[0] if log else None)

