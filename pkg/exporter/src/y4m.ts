/**
 * YUV4MPEG2 (Y4M) parsing. Only the luma plane is consumed; chroma is
 * skipped according to the declared subsampling. Videos must already be at
 * 25 fps (the toolkit's frame-rate convention).
 */

export interface LumaVideo {
  width: number;
  height: number;
  fps: number;
  /** one Y plane per frame, width*height bytes each, values 0..255 */
  frames: Uint8Array[];
}

const CHROMA_FACTOR: Record<string, number> = {
  "420": 0.5, // two quarter-size planes
  "420jpeg": 0.5,
  "420mpeg2": 0.5,
  "420paldv": 0.5,
  "422": 1.0,
  "444": 2.0,
  mono: 0.0,
};

export function decodeY4m(buf: Buffer): LumaVideo {
  const headerEnd = buf.indexOf(0x0a);
  if (headerEnd < 0) throw new Error("missing Y4M header terminator");
  const header = buf.toString("ascii", 0, headerEnd);
  if (!header.startsWith("YUV4MPEG2")) throw new Error("not a YUV4MPEG2 stream");
  let width = 0;
  let height = 0;
  let fpsNum = 0;
  let fpsDen = 1;
  let chroma = "420";
  for (const field of header.split(" ").slice(1)) {
    const tag = field[0];
    const value = field.slice(1);
    if (tag === "W") width = parseInt(value, 10);
    else if (tag === "H") height = parseInt(value, 10);
    else if (tag === "F") {
      const [num, den] = value.split(":");
      fpsNum = parseInt(num, 10);
      fpsDen = parseInt(den, 10);
    } else if (tag === "C") chroma = value;
  }
  if (!(width > 0) || !(height > 0)) throw new Error("invalid Y4M geometry");
  const factor = CHROMA_FACTOR[chroma];
  if (factor === undefined) throw new Error(`unsupported chroma mode C${chroma}`);
  const fps = fpsNum / fpsDen;
  const lumaBytes = width * height;
  const frameBytes = Math.floor(lumaBytes * (1 + factor));

  const frames: Uint8Array[] = [];
  let offset = headerEnd + 1;
  while (offset < buf.length) {
    const markerEnd = buf.indexOf(0x0a, offset);
    if (markerEnd < 0) throw new Error("truncated frame marker");
    const marker = buf.toString("ascii", offset, markerEnd);
    if (!marker.startsWith("FRAME")) throw new Error(`bad frame marker ${marker}`);
    offset = markerEnd + 1;
    if (offset + frameBytes > buf.length) throw new Error("truncated frame payload");
    frames.push(new Uint8Array(buf.subarray(offset, offset + lumaBytes)));
    offset += frameBytes;
  }
  if (frames.length === 0) throw new Error("no frames in Y4M stream");
  return { width, height, fps, frames };
}

export function encodeY4m(video: LumaVideo, chroma: "mono" | "420" = "mono"): Buffer {
  const parts: Buffer[] = [
    Buffer.from(
      `YUV4MPEG2 W${video.width} H${video.height} F${Math.round(video.fps)}:1 Ip A1:1 C${chroma}\n`,
      "ascii",
    ),
  ];
  const chromaBytes =
    chroma === "mono" ? 0 : Math.floor((video.width * video.height) / 2);
  for (const frame of video.frames) {
    parts.push(Buffer.from("FRAME\n", "ascii"));
    parts.push(Buffer.from(frame));
    if (chromaBytes > 0) parts.push(Buffer.alloc(chromaBytes, 128));
  }
  return Buffer.concat(parts);
}
