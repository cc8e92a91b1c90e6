// Run-length decoding of label payloads.

export function rleDecode(
  runs: [number, number][],
  expected: number,
): Int32Array {
  const out = new Int32Array(expected);
  let pos = 0;
  for (const [value, count] of runs) {
    if (count < 0 || pos + count > expected) {
      throw new Error(`RLE overruns payload: ${pos}+${count} > ${expected}`);
    }
    out.fill(value, pos, pos + count);
    pos += count;
  }
  if (pos !== expected) {
    throw new Error(`RLE short payload: ${pos} of ${expected}`);
  }
  return out;
}

const B64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

export function b64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  const clean = b64.replace(/=+$/, "");
  const out = new Uint8Array(Math.floor((clean.length * 3) / 4));
  let buffer = 0;
  let bits = 0;
  let pos = 0;
  for (const ch of clean) {
    buffer = (buffer << 6) | B64.indexOf(ch);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out[pos++] = (buffer >> bits) & 0xff;
    }
  }
  return out;
}
