/**
 * The local signer: private keys never leave this module, and never travel
 * in a request — only signatures and challenge proofs do.
 *
 * Keys arrive either as a raw 32-byte hex seed or as the shared encrypted
 * key-container format (scrypt + AES-256-GCM). Browsers have no native
 * scrypt, so container import takes an injectable scrypt function; the node
 * test harness wires node:crypto, a bundled app can wire a wasm/js scrypt.
 */

import { bytesToHex, concatBytes, digestOf, hexToBytes, Json } from "./canonical.js";

const PKCS8_ED25519_PREFIX = hexToBytes("302e020100300506032b657004220420");

export type ScryptFn = (
  passphrase: Uint8Array,
  salt: Uint8Array,
  n: number,
  r: number,
  p: number,
  length: number,
) => Promise<Uint8Array>;

export interface KeyContainer {
  version: number;
  user_id: string;
  public_key: string;
  kdf: { name: string; salt: string; n: number; r: number; p: number };
  cipher: { name: string; nonce: string };
  ciphertext: string;
}

export class LocalSigner {
  private constructor(
    readonly userId: string,
    readonly publicKeyHex: string,
    private readonly privateKey: CryptoKey,
  ) {}

  /** Import a raw 32-byte private seed (hex). */
  static async fromSeedHex(userId: string, seedHex: string): Promise<LocalSigner> {
    const seed = hexToBytes(seedHex);
    if (seed.length !== 32) throw new Error("private seed must be 32 bytes");
    const pkcs8 = concatBytes(PKCS8_ED25519_PREFIX, seed);
    const privateKey = await crypto.subtle.importKey(
      "pkcs8", pkcs8 as BufferSource, { name: "Ed25519" }, false, ["sign"],
    );
    const publicHex = await derivePublicHex(pkcs8);
    return new LocalSigner(userId, publicHex, privateKey);
  }

  /** Open a key container; compatible with the CLI's `key gen` output. */
  static async fromContainer(
    container: KeyContainer, passphrase: string, scrypt: ScryptFn,
  ): Promise<LocalSigner> {
    if (container.version !== 1 || container.kdf.name !== "scrypt") {
      throw new Error("unsupported key container");
    }
    const kek = await scrypt(
      new TextEncoder().encode(passphrase),
      hexToBytes(container.kdf.salt),
      container.kdf.n, container.kdf.r, container.kdf.p, 32,
    );
    const aesKey = await crypto.subtle.importKey(
      "raw", kek as BufferSource, { name: "AES-GCM" }, false, ["decrypt"],
    );
    let seed: ArrayBuffer;
    try {
      seed = await crypto.subtle.decrypt(
        { name: "AES-GCM", iv: hexToBytes(container.cipher.nonce) as BufferSource },
        aesKey,
        hexToBytes(container.ciphertext) as BufferSource,
      );
    } catch {
      throw new Error("wrong passphrase or corrupted key container");
    }
    const signer = await LocalSigner.fromSeedHex(
      container.user_id, bytesToHex(new Uint8Array(seed)),
    );
    if (signer.publicKeyHex !== container.public_key) {
      throw new Error("container public key does not match the private key");
    }
    return signer;
  }

  async signBytes(message: Uint8Array): Promise<string> {
    const signature = await crypto.subtle.sign(
      { name: "Ed25519" }, this.privateKey, message as BufferSource,
    );
    return bytesToHex(new Uint8Array(signature));
  }

  async signDigestHex(digestHex: string): Promise<string> {
    return this.signBytes(hexToBytes(digestHex));
  }

  /** Build a signed transaction envelope around a payload. */
  async signTx(payload: Json): Promise<Envelope> {
    const txId = await digestOf(payload);
    return {
      tx_id: txId,
      payload,
      initiator: this.userId,
      timestamp: (payload as { tick: number }).tick,
      signature: await this.signDigestHex(txId),
    };
  }

  /** Sign a challenge: nonce bytes followed by the operation digest bytes. */
  async signChallenge(nonceHex: string, operationDigest: string): Promise<string> {
    return this.signBytes(concatBytes(hexToBytes(nonceHex), hexToBytes(operationDigest)));
  }
}

export interface Envelope {
  tx_id: string;
  payload: Json;
  initiator: string;
  timestamp: number;
  signature: string;
}

async function derivePublicHex(pkcs8: Uint8Array): Promise<string> {
  const withPublic = await crypto.subtle.importKey(
    "pkcs8", pkcs8 as BufferSource, { name: "Ed25519" }, true, ["sign"],
  );
  const jwk = await crypto.subtle.exportKey("jwk", withPublic);
  if (!jwk.x) throw new Error("key export did not include the public part");
  return bytesToHex(base64UrlToBytes(jwk.x));
}

function base64UrlToBytes(value: string): Uint8Array {
  const base64 = value.replace(/-/g, "+").replace(/_/g, "/");
  const padded = base64 + "=".repeat((4 - (base64.length % 4)) % 4);
  const raw = atob(padded);
  const out = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) out[i] = raw.charCodeAt(i);
  return out;
}

/** Operation digests for the high-risk challenge flow (mirror the backend). */
export async function submitOpDigest(paymentId: string): Promise<string> {
  return digestOf(["op", "submit-payment", paymentId]);
}

export async function reviewOpDigest(
  paymentId: string, stepIndex: number, verdict: string,
): Promise<string> {
  return digestOf(["op", "review-payment", paymentId, stepIndex, verdict]);
}

/** Digest an approver signs when deciding a step. */
export async function reviewDecisionDigest(
  paymentId: string, stepIndex: number, verdict: string,
): Promise<string> {
  return digestOf(["review", paymentId, stepIndex, verdict]);
}
