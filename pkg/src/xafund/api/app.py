"""HTTP/JSON boundary.

Every business operation is exposed 1:1 under /v1.  Mutating endpoints
accept a signed transaction envelope produced client-side; the server holds
no user keys and cannot fabricate a signature, so nothing mutates state
without a verifying signature no matter what arrives over the wire.  Module
errors map to stable {code, message, detail} bodies with 4xx statuses; 5xx
is reserved for genuine internal faults.
"""

from __future__ import annotations

from typing import Optional

from fastapi import Depends, FastAPI, Header, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .. import events as ev
from ..errors import (
    ChallengeFailed,
    ChallengeRequired,
    DomainError,
    Forbidden,
    ValidationFailed,
)
from .auth import SessionStore, authorize

_STATUS_BY_CODE = {
    "BAD_CREDENTIAL": 401,
    "TOKEN_EXPIRED": 401,
    "FORBIDDEN": 403,
    "NOT_ORG_ADMIN": 403,
    "SELF_APPROVAL": 403,
    "WRONG_ROLE": 403,
    "UNKNOWN_CHAIN": 404,
    "UNKNOWN_ORG": 404,
    "UNKNOWN_USER": 404,
    "UNKNOWN_PROJECT": 404,
    "UNKNOWN_CONTRACT": 404,
    "UNKNOWN_PAYMENT": 404,
    "UNKNOWN_BATCH": 404,
    "UNKNOWN_BANK": 404,
    "UNKNOWN_KIND": 404,
    "CONFLICT": 409,
    "DUPLICATE_TX": 409,
    "DUPLICATE_ORG": 409,
    "DUPLICATE_BATCH_DIFFERENT_CONTENT": 409,
    "WRONG_STATE": 409,
    "ALREADY_COMPLETED": 409,
    "PAYMENTS_IN_FLIGHT": 409,
    "PARENT_CAP_EXCEEDED": 409,
    "PARENT_NOT_ACTIVE": 409,
    "CONTRACT_NOT_ACTIVE": 409,
    "STAGE_MISMATCH": 409,
    "STORE_NOT_EMPTY": 409,
    "TRANSIENT_BANK_ERROR": 503,
    "RETRIES_EXHAUSTED": 503,
}


class LoginBody(BaseModel):
    user_id: str
    passphrase: str


class ChallengeBody(BaseModel):
    operation_digest: str = Field(min_length=64, max_length=64)


class Envelope(BaseModel):
    tx_id: str
    payload: dict
    initiator: str
    timestamp: int
    signature: str

    def as_tx(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "payload": self.payload,
            "initiator": self.initiator,
            "timestamp": self.timestamp,
            "signature": self.signature,
        }


def create_app(deployment) -> FastAPI:
    app = FastAPI(
        title="xafund", version="0.1.0",
        docs_url=None, redoc_url=None, openapi_url=None,
    )
    from fastapi.middleware.cors import CORSMiddleware

    # the webapp may be served from a different origin than the API; tokens
    # ride in the Authorization header, so no cookies or credentials here
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["Authorization", "Content-Type"],
    )
    sessions = SessionStore(deployment)
    d = deployment

    # -- error surface ---------------------------------------------------------

    @app.exception_handler(DomainError)
    async def domain_error_handler(request: Request, exc: DomainError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        return JSONResponse(status_code=status, content=exc.to_dict())

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "VALIDATION_FAILED", "message": "malformed request body",
                     "detail": str(exc.errors()[:3])},
        )

    @app.exception_handler(Exception)
    async def fallback_handler(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500,
            content={"code": "INTERNAL", "message": "internal fault", "detail": None},
        )

    # -- auth ---------------------------------------------------------------------

    def session_dep(authorization: Optional[str] = Header(default=None)):
        token = None
        if authorization and authorization.lower().startswith("bearer "):
            token = authorization[7:].strip()
        return sessions.resolve(token)

    def check(session, action: str, resource: Optional[str] = None) -> None:
        if not authorize(d.network.registry_view(), session, action, resource):
            raise Forbidden(f"{action} denied for {session.user_id}")

    def checked_envelope(envelope: Envelope, session, expected_type: str) -> dict:
        tx = envelope.as_tx()
        if tx["payload"].get("type") != expected_type:
            raise ValidationFailed(f"this endpoint takes {expected_type} payloads")
        if tx["initiator"] != session.user_id:
            raise Forbidden("envelope initiator does not match the session user")
        tick = tx["payload"].get("tick")
        now = d.clock.now
        if not isinstance(tick, int) or tick > now or now - tick > 2 * d.network.config.challenge_ttl:
            raise ValidationFailed("payload tick is outside the accepted window")
        return tx

    @app.post("/v1/auth/login")
    def login(body: LoginBody):
        session = sessions.login(body.user_id, body.passphrase)
        return {
            "token": session.token,
            "user_id": session.user_id,
            "org_id": session.org_id,
            "role": session.role,
            "expires_tick": session.expires_tick,
        }

    @app.get("/v1/time")
    def time_now(session=Depends(session_dep)):
        return {"tick": d.clock.now, "core_height": d.network.core.tip}

    @app.post("/v1/challenges")
    def issue_challenge(body: ChallengeBody, session=Depends(session_dep)):
        issued = d.challenges.issue(session.user_id, body.operation_digest)
        return {**issued, "operation_digest": body.operation_digest}

    # -- orgs and users ---------------------------------------------------------------

    @app.post("/v1/orgs")
    def register_org(envelope: Envelope, session=Depends(session_dep)):
        check(session, "org.register")
        tx = checked_envelope(envelope, session, ev.ORG_REGISTERED)
        return d.registry.submit_envelope(tx)

    @app.get("/v1/orgs")
    def list_orgs(role: Optional[str] = None, session=Depends(session_dep)):
        if role is not None and role not in ev.ORG_ROLES:
            raise ValidationFailed(f"unknown org role {role}")
        return {"orgs": d.registry.orgs(role)}

    @app.get("/v1/orgs/{org_id}")
    def get_org(org_id: str, session=Depends(session_dep)):
        org = d.registry.org(org_id)
        if org is None:
            _unknown("org", org_id)
        return org

    @app.post("/v1/orgs/{org_id}/accounts")
    def set_account(org_id: str, envelope: Envelope, session=Depends(session_dep)):
        check(session, "org.set_account", org_id)
        tx = checked_envelope(envelope, session, ev.BANK_ACCOUNT_SET)
        if tx["payload"].get("org_id") != org_id:
            raise ValidationFailed("payload org does not match the path")
        return d.registry.submit_envelope(tx)

    @app.post("/v1/users")
    def register_user_key(envelope: Envelope, session=Depends(session_dep)):
        tx = checked_envelope(envelope, session, ev.USER_KEY_REGISTERED)
        check(session, "user.rotate_key", tx["payload"].get("user_id"))
        return d.registry.submit_envelope(tx)

    # -- projects ----------------------------------------------------------------------

    @app.post("/v1/projects")
    def create_project(envelope: Envelope, session=Depends(session_dep)):
        check(session, "project.create")
        tx = checked_envelope(envelope, session, ev.PROJECT_CREATED)
        return d.registry.submit_envelope(tx)

    @app.get("/v1/projects")
    def list_projects(session=Depends(session_dep)):
        return {"projects": d.registry.projects()}

    @app.get("/v1/projects/{project_id}")
    def get_project(project_id: str, session=Depends(session_dep)):
        return d.registry.project(project_id)

    @app.post("/v1/projects/{project_id}/stage")
    def advance_stage(project_id: str, envelope: Envelope, session=Depends(session_dep)):
        check(session, "project.advance")
        tx = checked_envelope(envelope, session, ev.PROJECT_STAGE_ADVANCED)
        if tx["payload"].get("project_id") != project_id:
            raise ValidationFailed("payload project does not match the path")
        return d.registry.submit_envelope(tx)

    # -- contracts ----------------------------------------------------------------------

    @app.post("/v1/contracts")
    def create_contract(envelope: Envelope, session=Depends(session_dep)):
        tx = checked_envelope(envelope, session, ev.CONTRACT_CREATED)
        return d.registry.submit_envelope(tx)

    @app.get("/v1/contracts")
    def list_contracts(project: Optional[str] = None, session=Depends(session_dep)):
        return {"contracts": d.registry.contracts(project)}

    @app.get("/v1/contracts/{contract_id}")
    def get_contract(contract_id: str, session=Depends(session_dep)):
        contract = d.registry.contract(contract_id)
        if contract is None:
            _unknown("contract", contract_id)
        return contract

    @app.post("/v1/contracts/{contract_id}/review")
    def review_contract(contract_id: str, envelope: Envelope, session=Depends(session_dep)):
        check(session, "contract.review", contract_id)
        tx = checked_envelope(envelope, session, ev.CONTRACT_REVIEWED)
        _match_path(tx, "contract_id", contract_id)
        return d.registry.submit_envelope(tx)

    @app.post("/v1/contracts/{contract_id}/amend")
    def amend_contract(contract_id: str, envelope: Envelope, session=Depends(session_dep)):
        tx = checked_envelope(envelope, session, ev.CONTRACT_AMENDED)
        _match_path(tx, "contract_id", contract_id)
        return d.registry.submit_envelope(tx)

    @app.post("/v1/contracts/{contract_id}/void")
    def void_contract(contract_id: str, envelope: Envelope, session=Depends(session_dep)):
        tx = checked_envelope(envelope, session, ev.CONTRACT_VOIDED)
        _match_path(tx, "contract_id", contract_id)
        blocking = d.registry._in_flight_payments(contract_id)
        if blocking:
            from ..errors import PaymentsInFlight

            raise PaymentsInFlight("contract has in-flight payments", detail=blocking)
        return d.registry.submit_envelope(tx)

    # -- payments -----------------------------------------------------------------------

    @app.post("/v1/payments")
    def create_payment(envelope: Envelope, session=Depends(session_dep)):
        tx = checked_envelope(envelope, session, ev.PAYMENT_CREATED)
        contract = d.registry.contract(tx["payload"].get("contract_id"))
        if contract is None:
            _unknown("contract", tx["payload"].get("contract_id"))
        chain_id = f"pay-{contract['project_id']}"
        return d.payments.submit_envelope(chain_id, tx)

    @app.get("/v1/payments")
    def list_payments(project: Optional[str] = None, org: Optional[str] = None,
                      scenario: Optional[str] = None, state: Optional[str] = None,
                      cursor: int = 0, limit: int = 50, session=Depends(session_dep)):
        d.datahub.ingest()
        rows = d.datahub.query_payments(
            project=project, org=org, scenario=scenario, state=state,
            limit=limit, offset=cursor,
        )
        next_cursor = cursor + len(rows) if len(rows) == limit else None
        return {"payments": rows, "next_cursor": next_cursor}

    @app.get("/v1/payments/{payment_id}")
    def get_payment(payment_id: str, session=Depends(session_dep)):
        d.datahub.ingest()
        detail = d.datahub.payment_detail(payment_id)
        if detail is None:
            _unknown("payment", payment_id)
        return detail

    def _payment_chain_for(payment_id: str) -> str:
        chain_id, _ = d.payments.locate(payment_id)
        return chain_id

    def _require_challenge(tx: dict) -> None:
        proof = tx["payload"].get("challenge_proof")
        if not isinstance(proof, dict) or not proof.get("nonce"):
            raise ChallengeRequired("this operation needs a fresh challenge proof")
        if not d.challenges.verify_and_consume(tx["initiator"], proof):
            raise ChallengeFailed("challenge verification failed")

    @app.post("/v1/payments/{payment_id}/plan")
    def attach_plan(payment_id: str, envelope: Envelope, session=Depends(session_dep)):
        tx = checked_envelope(envelope, session, ev.SPLIT_PLAN_COMMITTED)
        _match_path(tx, "payment_id", payment_id)
        return d.payments.submit_envelope(_payment_chain_for(payment_id), tx)

    @app.post("/v1/payments/{payment_id}/submit")
    def submit_payment(payment_id: str, envelope: Envelope, session=Depends(session_dep)):
        tx = checked_envelope(envelope, session, ev.PAYMENT_SUBMITTED)
        _match_path(tx, "payment_id", payment_id)
        _require_challenge(tx)
        return d.payments.submit_envelope(_payment_chain_for(payment_id), tx)

    @app.post("/v1/payments/{payment_id}/review")
    def review_payment(payment_id: str, envelope: Envelope, session=Depends(session_dep)):
        tx = checked_envelope(envelope, session, ev.PAYMENT_REVIEWED)
        _match_path(tx, "payment_id", payment_id)
        chain_id, record = d.payments.locate(payment_id)
        if record["state"] == "InReview" and tx["payload"].get("step_index") != record["current_step"]:
            from ..errors import StaleState

            raise StaleState("another reviewer already decided this step")
        _require_challenge(tx)
        out = d.payments.submit_envelope(chain_id, tx)
        out["state"] = d.payments.payment(payment_id)["state"]
        return out

    @app.post("/v1/payments/{payment_id}/release")
    def release_payment(payment_id: str, session=Depends(session_dep)):
        check(session, "payment.release", payment_id)
        return d.payments.release_to_bank(payment_id)

    @app.post("/v1/payments/{payment_id}/status")
    def refresh_status(payment_id: str, session=Depends(session_dep)):
        return d.payments.poll_and_apply(payment_id)

    @app.get("/v1/payments/{payment_id}/status")
    def read_status(payment_id: str, session=Depends(session_dep)):
        record = d.payments.payment(payment_id)
        return {
            "payment_id": payment_id,
            "state": record["state"],
            "instr_status": record["instr_status"],
            "failed_instrs": record["failed_instrs"],
        }

    @app.get("/v1/inbox")
    def inbox(session=Depends(session_dep)):
        d.datahub.ingest()
        return {"items": d.datahub.inbox_for(session.user_id)}

    # -- reporting -----------------------------------------------------------------------

    @app.get("/v1/dashboard")
    def dashboard(session=Depends(session_dep)):
        d.datahub.ingest()
        return d.datahub.dashboard_aggregates()

    @app.get("/v1/reports/{kind}")
    def report(kind: str, session=Depends(session_dep)):
        d.datahub.ingest()
        return PlainTextResponse(d.datahub.export_report(kind), media_type="text/csv")

    # -- chain access ----------------------------------------------------------------------

    @app.get("/v1/chain/{chain_id}/verify")
    def verify_chain(chain_id: str, session=Depends(session_dep)):
        return d.network.verify_chain(chain_id)

    @app.get("/v1/chain/{chain_id}/roots")
    def chain_roots(chain_id: str, session=Depends(session_dep)):
        chain = d.network.chain(chain_id)
        return {"chain_id": chain_id, "tip": chain.tip, "roots": list(chain.roots)}

    return app


def _unknown(kind: str, identifier) -> None:
    from ..errors import (
        UnknownContract,
        UnknownOrg,
        UnknownPayment,
        UnknownProject,
    )

    cls = {
        "org": UnknownOrg,
        "contract": UnknownContract,
        "payment": UnknownPayment,
        "project": UnknownProject,
    }[kind]
    raise cls(f"{kind} {identifier} unknown")


def _match_path(tx: dict, field: str, value: str) -> None:
    if tx["payload"].get(field) != value:
        raise ValidationFailed(f"payload {field} does not match the path")
