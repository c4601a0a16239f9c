/**
 * Codec contract tests. The fixture corpus is shared with the server-side
 * test suite, so both ends prove they speak the same dialect.
 */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";
import { describe, expect, it } from "vitest";

import { encode, isDecodeFailure, LineDecoder, WireMessage } from "../src/codec.js";

const here = dirname(fileURLToPath(import.meta.url));
const corpus = JSON.parse(
  readFileSync(join(here, "..", "..", "fixtures", "codec_roundtrip.json"), "utf-8"),
) as { messages: Record<string, unknown>[]; invalid_lines: string[] };

describe("round-trip over the shared corpus", () => {
  it("decode(encode(msg)) preserves every message exactly", () => {
    for (const msg of corpus.messages) {
      const dec = new LineDecoder();
      const out = dec.feed(encode(msg));
      expect(out).toHaveLength(1);
      expect(isDecodeFailure(out[0]!)).toBe(false);
      expect(out[0]).toEqual(msg);
    }
  });

  it("decodes server-style encodings (spaces, float formatting) identically", () => {
    // the server may format numbers differently (50.0 vs 50); parsing must agree
    const dec = new LineDecoder();
    const line = '{"type": "config", "rate": 50.0, "config": {}, "joints": {}}\n';
    const out = dec.feed(line);
    expect(out).toHaveLength(1);
    expect((out[0] as WireMessage & { rate: number }).rate).toBe(50);
  });

  it("every invalid line yields a decode failure, not a message", () => {
    for (const bad of corpus.invalid_lines) {
      const dec = new LineDecoder();
      const out = [...dec.feed(bad + "\n")];
      const tail = dec.flush();
      if (tail !== null) out.push(tail);
      expect(out).toHaveLength(1);
      expect(isDecodeFailure(out[0]!)).toBe(true);
    }
  });
});

describe("incremental framing", () => {
  it("reassembles messages fed in 7-byte chunks", () => {
    const stream = corpus.messages.map((m) => encode(m)).join("");
    const dec = new LineDecoder();
    const out: unknown[] = [];
    for (let i = 0; i < stream.length; i += 7) {
      out.push(...dec.feed(stream.slice(i, i + 7)));
    }
    expect(out).toEqual(corpus.messages);
  });

  it("handles several messages coalesced into one chunk", () => {
    const dec = new LineDecoder();
    const out = dec.feed(encode({ type: "ack", id: 1, flags: [] }) + encode({ type: "ack", id: 2, flags: [] }));
    expect(out.map((m) => (m as { id: number }).id)).toEqual([1, 2]);
  });

  it("reports byte offsets and resynchronizes at the next newline", () => {
    const good = encode({ type: "ack", id: 1, flags: [] });
    const dec = new LineDecoder();
    const out = dec.feed('{"oops\n' + good + "not json\n" + good);
    expect(out).toHaveLength(4);
    const fail0 = out[0]!;
    expect(isDecodeFailure(fail0)).toBe(true);
    expect((fail0 as { offset: number }).offset).toBe(0);
    expect(out[1]).toEqual({ type: "ack", id: 1, flags: [] });
    const fail2 = out[2]!;
    expect(isDecodeFailure(fail2)).toBe(true);
    expect((fail2 as { offset: number }).offset).toBe(7 + good.length);
    expect(out[3]).toEqual({ type: "ack", id: 1, flags: [] });
  });

  it("counts offsets in bytes, not code units, for non-ASCII payloads", () => {
    const dec = new LineDecoder();
    const first = encode({ type: "err", id: null, error: "café" }); // é is 2 bytes
    dec.feed(first);
    const out = dec.feed("broken\n");
    expect((out[0] as { offset: number }).offset).toBe(new TextEncoder().encode(first).length);
  });

  it("flush reports a truncated trailing line once", () => {
    const dec = new LineDecoder();
    expect(dec.feed('{"type": "ack"')).toEqual([]);
    const fail = dec.flush();
    expect(fail).not.toBeNull();
    expect(fail!.offset).toBe(0);
    expect(dec.flush()).toBeNull();
  });

  it("rejects JSON values that are not objects", () => {
    const dec = new LineDecoder();
    for (const bad of ["[1, 2, 3]", '"string"', "42", "null", "true"]) {
      const out = dec.feed(bad + "\n");
      expect(out).toHaveLength(1);
      expect(isDecodeFailure(out[0]!)).toBe(true);
    }
  });

  it("skips blank lines silently", () => {
    const dec = new LineDecoder();
    expect(dec.feed("\n\n" + encode({ type: "ack", id: 3, flags: [] }))).toHaveLength(1);
  });
});
