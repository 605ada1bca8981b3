/**
 * Canonical JSON, byte-compatible with the backend's encoder: keys sorted,
 * no whitespace, raw UTF-8, integers only. Payload digests and therefore
 * transaction ids computed here match the server's exactly.
 */

export type Json = null | boolean | number | string | Json[] | { [key: string]: Json };

export function canonicalJson(value: Json): string {
  if (value === null) return "null";
  const kind = typeof value;
  if (kind === "boolean") return value ? "true" : "false";
  if (kind === "number") {
    if (!Number.isInteger(value)) {
      throw new Error("floats are not allowed in canonical structures");
    }
    if (!Number.isSafeInteger(value)) {
      throw new Error("integer exceeds the safe range");
    }
    return String(value);
  }
  if (kind === "string") return JSON.stringify(value);
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  if (kind === "object") {
    const record = value as { [key: string]: Json };
    // ASCII keys throughout this protocol, so code-unit sort == codepoint sort
    const keys = Object.keys(record).sort();
    return "{" + keys.map((k) => JSON.stringify(k) + ":" + canonicalJson(record[k])).join(",") + "}";
  }
  throw new Error(`value of type ${kind} is not canonically encodable`);
}

export function canonicalBytes(value: Json): Uint8Array {
  return new TextEncoder().encode(canonicalJson(value));
}

export async function sha256Hex(data: Uint8Array): Promise<string> {
  const digest = await crypto.subtle.digest("SHA-256", data as BufferSource);
  return bytesToHex(new Uint8Array(digest));
}

export async function digestOf(value: Json): Promise<string> {
  return sha256Hex(canonicalBytes(value));
}

export function bytesToHex(bytes: Uint8Array): string {
  let out = "";
  for (const b of bytes) out += b.toString(16).padStart(2, "0");
  return out;
}

export function hexToBytes(hex: string): Uint8Array {
  if (hex.length % 2 !== 0 || /[^0-9a-fA-F]/.test(hex)) {
    throw new Error("malformed hex");
  }
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(i * 2, i * 2 + 2), 16);
  }
  return out;
}

export function concatBytes(a: Uint8Array, b: Uint8Array): Uint8Array {
  const out = new Uint8Array(a.length + b.length);
  out.set(a, 0);
  out.set(b, a.length);
  return out;
}
