"""Sessions and the role-permission matrix.

A session token authenticates reads and pins which user a submitted
envelope may come from; it grants nothing beyond the user's own role.  The
matrix here is an early-deny mirror of the on-chain gates: the transition
function remains the authority, this layer just answers quickly and
uniformly.
"""

from __future__ import annotations

import secrets
import threading
from dataclasses import dataclass
from typing import Optional

from ..errors import BadCredential, TokenExpired

SESSION_LIFETIME_TICKS = 100_000


@dataclass
class Session:
    token: str
    user_id: str
    org_id: Optional[str]
    role: str
    expires_tick: int


class SessionStore:
    def __init__(self, deployment, lifetime: int = SESSION_LIFETIME_TICKS):
        self.d = deployment
        self.lifetime = lifetime
        self._sessions = {}
        self._lock = threading.Lock()

    def login(self, user_id: str, passphrase: str) -> Session:
        if not isinstance(user_id, str) or not isinstance(passphrase, str):
            raise BadCredential("credentials must be strings")
        if not self.d.verify_credential(user_id, passphrase):
            raise BadCredential("unknown user or wrong passphrase")
        user = self.d.network.registry_view().user(user_id)
        if user is None:
            raise BadCredential("user has no on-chain identity")
        session = Session(
            token=secrets.token_hex(16),
            user_id=user_id,
            org_id=user.get("org_id"),
            role=user.get("role"),
            expires_tick=self.d.clock.now + self.lifetime,
        )
        with self._lock:
            self._sessions[session.token] = session
        return session

    def resolve(self, token: Optional[str]) -> Session:
        if not token:
            raise TokenExpired("missing bearer token")
        with self._lock:
            session = self._sessions.get(token)
        if session is None:
            raise TokenExpired("unknown or revoked token")
        if self.d.clock.now > session.expires_tick:
            raise TokenExpired("session expired")
        return session


def authorize(view, session: Session, action: str, resource: Optional[str] = None) -> bool:
    """allow/deny per the role-permission matrix. Reads are open to every
    authenticated participant (whole-process supervision); writes mirror the
    on-chain gates."""
    user_id = session.user_id
    if action in ("org.read", "project.read", "contract.read", "payment.read",
                  "dashboard.read", "report.read", "chain.read", "inbox.read"):
        return True
    if action in ("org.register", "project.create", "project.advance"):
        return view.is_system(user_id)
    if action == "org.set_account":
        org = view.org(resource) if resource else None
        return bool(org and org.get("admin_user") == user_id)
    if action == "contract.review":
        contract = view.contract(resource) if resource else None
        if contract is None:
            return False
        return view.member_of(user_id, contract["party_a"]) or view.is_government(user_id)
    if action == "payment.release":
        return True  # gated by the completed approval chain, not the caller
    if action == "user.rotate_key":
        return resource == user_id
    return False
