/** Binary PGM (P5) decoding for the telemetry frame payload. */

export interface GrayFrame {
  width: number;
  height: number;
  pixels: Uint8Array; // row-major, top row first
}

/** base64 -> bytes, in both browsers and node test runs. */
export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const binary = atob(b64);
    const bytes = new Uint8Array(binary.length);
    for (let i = 0; i < binary.length; i++) bytes[i] = binary.charCodeAt(i);
    return bytes;
  }
  const nodeBuffer = (globalThis as Record<string, any>).Buffer;
  return new Uint8Array(nodeBuffer.from(b64, "base64"));
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}

/** Decode a binary PGM; throws on anything that is not P5/maxval 255. */
export function decodePgm(bytes: Uint8Array): GrayFrame {
  if (bytes.length < 2 || bytes[0] !== 0x50 || bytes[1] !== 0x35) {
    throw new Error("not a binary PGM (P5) payload");
  }
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < bytes.length && isSpace(bytes[pos])) pos++;
    if (bytes[pos] === 0x23) {
      // '#' comment runs to end of line
      while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      continue;
    }
    let token = "";
    while (pos < bytes.length && !isSpace(bytes[pos])) {
      token += String.fromCharCode(bytes[pos]);
      pos++;
    }
    if (!/^\d+$/.test(token)) throw new Error(`bad PGM header token "${token}"`);
    fields.push(parseInt(token, 10));
  }
  pos++; // single whitespace byte after maxval
  const [width, height, maxval] = fields;
  if (maxval !== 255) throw new Error(`unsupported PGM maxval ${maxval}`);
  const expected = width * height;
  const payload = bytes.subarray(pos);
  if (payload.length !== expected) {
    throw new Error(`PGM payload is ${payload.length} bytes, expected ${expected}`);
  }
  return { width, height, pixels: payload };
}
