// Wire protocol for the demo server: single-line text messages over a
// websocket. Coordinates are normalized gel units (x right, y up, origin at
// the gel center, unit = gel radius); positive theta is counter-clockwise
// on screen.

export interface HelloInfo {
  version: number;
  width: number;
  height: number;
  centerX: number;
  centerY: number;
  radiusPx: number;
  markers: number;
  windowUs: number;
}

export interface Detection {
  tUs: number;
  type: string;
  points: [number, number][];
  intensityMm: number;
  s?: number;
  theta?: number;
  tx?: number;
  ty?: number;
  outliers: number;
  resting: boolean;
  eventsPos: number;
  eventsNeg: number;
  markers?: [number, number][];
}

export function fingerLine(tMs: number, id: number, x: number, y: number, pressed: boolean): string {
  return `finger t_ms=${tMs.toFixed(3)} id=${id} x=${x.toFixed(4)} y=${y.toFixed(4)} pressed=${pressed ? 1 : 0}`;
}

export function tickLine(tMs: number): string {
  return `tick t_ms=${tMs.toFixed(3)}`;
}

export function helloLine(): string {
  return "hello version=1";
}

function parseKv(line: string): [string, Map<string, string>] {
  const parts = line.trim().split(" ");
  const kv = new Map<string, string>();
  for (const token of parts.slice(1)) {
    const eq = token.indexOf("=");
    if (eq > 0) kv.set(token.slice(0, eq), token.slice(eq + 1));
  }
  return [parts[0], kv];
}

function parsePoints(raw: string | undefined): [number, number][] {
  if (!raw) return [];
  const out: [number, number][] = [];
  for (const chunk of raw.split(";")) {
    if (!chunk) continue;
    const [x, y] = chunk.split(":");
    out.push([parseFloat(x), parseFloat(y)]);
  }
  return out;
}

export function parseHello(line: string): HelloInfo | null {
  const [kind, kv] = parseKv(line);
  if (kind !== "hello") return null;
  return {
    version: parseInt(kv.get("version") ?? "0"),
    width: parseInt(kv.get("width") ?? "346"),
    height: parseInt(kv.get("height") ?? "260"),
    centerX: parseFloat(kv.get("center_x") ?? "173"),
    centerY: parseFloat(kv.get("center_y") ?? "130"),
    radiusPx: parseFloat(kv.get("radius_px") ?? "75"),
    markers: parseInt(kv.get("markers") ?? "177"),
    windowUs: parseInt(kv.get("window_us") ?? "10000"),
  };
}

export function parseDetection(line: string): Detection | null {
  const [kind, kv] = parseKv(line);
  if (kind !== "detect") return null;
  const det: Detection = {
    tUs: parseInt(kv.get("t") ?? "0"),
    type: kv.get("type") ?? "NoGesture",
    points: parsePoints(kv.get("points")),
    intensityMm: parseFloat(kv.get("intensity_mm") ?? "0"),
    outliers: parseInt(kv.get("outliers") ?? "0"),
    resting: kv.get("resting") === "1",
    eventsPos: parseInt(kv.get("events_pos") ?? "0"),
    eventsNeg: parseInt(kv.get("events_neg") ?? "0"),
  };
  if (kv.has("s")) {
    det.s = parseFloat(kv.get("s")!);
    det.theta = parseFloat(kv.get("theta")!);
    det.tx = parseFloat(kv.get("tx")!);
    det.ty = parseFloat(kv.get("ty")!);
  }
  if (kv.has("markers")) det.markers = parsePoints(kv.get("markers"));
  return det;
}

export function isError(line: string): boolean {
  return line.startsWith("error");
}
