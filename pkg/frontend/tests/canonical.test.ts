/** Byte compatibility with the backend's canonical encoder. */

import { describe, expect, it } from "vitest";

import { canonicalJson, digestOf } from "../src/canonical.js";

describe("canonical json", () => {
  it("sorts keys recursively with no whitespace", () => {
    expect(canonicalJson({ b: 1, a: [2, { z: 0, y: 1 }] })).toBe(
      '{"a":[2,{"y":1,"z":0}],"b":1}',
    );
  });

  it("keeps unicode raw", () => {
    expect(canonicalJson({ name: "雄安" })).toBe('{"name":"雄安"}');
  });

  it("rejects floats anywhere", () => {
    expect(() => canonicalJson({ a: 1.5 })).toThrow();
    expect(() => canonicalJson([1, [2.5]])).toThrow();
  });

  // frozen against the backend encoder:
  //   digest_of({"a": [1, 2], "b": {"c": "x"}})
  //   digest_of({"type": "PaymentCreated", "tick": 7, "amount": 1000})
  //   digest_of(["op", "submit-payment", "PMT-0001"])
  it("matches backend digests exactly", async () => {
    expect(await digestOf({ a: [1, 2], b: { c: "x" } })).toBe(
      "187beda85b23dcd243763470d790ec4ced20c59fc09c1ec400f25487256589b8",
    );
    expect(await digestOf({ type: "PaymentCreated", tick: 7, amount: 1000 })).toBe(
      "1af07611fa85cef05d5182271c9a94a177169cce5469a99ad0544a0290baede6",
    );
    expect(await digestOf(["op", "submit-payment", "PMT-0001"])).toBe(
      "762857018dd5f63846eb89a5906735b0d68870d761ade8a1a9396f687951896a",
    );
  });
});
