// Wiring: websocket connection with auto-reconnect, pointer capture, the
// tick clock that drives the server's virtual time, and the render loop.

import { helloLine, isError, parseDetection, parseHello, tickLine } from "./protocol.js";
import { GelView, canvasToGel } from "./gel.js";
import { InputMapper } from "./input.js";
import { applyDetection, initialState } from "./state.js";
import { drawFrame, intensityFraction, statusText } from "./render.js";

const canvas = document.getElementById("stage") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = document.getElementById("banner")!;
const label = document.getElementById("gesture-label")!;
const meter = document.getElementById("intensity-fill")!;
const meterText = document.getElementById("intensity-text")!;
const activityPos = document.getElementById("activity-pos")!;
const activityNeg = document.getElementById("activity-neg")!;
const traceButton = document.getElementById("save-trace")!;

const view: GelView = { cx: 260, cy: 260, radius: 220 };
const state = initialState();
const mapper = new InputMapper();
const trace: string[] = [];

let socket: WebSocket | null = null;
let handshakeDone = false;
let lastSentMs = -1;
const t0 = performance.now();

function now(): number {
  // strictly increasing client clock in ms
  let t = performance.now() - t0;
  if (t <= lastSentMs) t = lastSentMs + 0.001;
  return t;
}

function send(line: string): void {
  if (!socket || socket.readyState !== WebSocket.OPEN || !handshakeDone) return;
  lastSentMs = Math.max(lastSentMs, parseFloat(line.split("t_ms=")[1] ?? "0"));
  socket.send(line);
  if (!line.startsWith("tick")) trace.push(line);
}

function connect(): void {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  socket = new WebSocket(`${proto}://${location.host}/ws`);
  socket.addEventListener("open", () => {
    socket!.send(helloLine());
  });
  socket.addEventListener("message", (ev) => {
    const line = String(ev.data);
    if (!handshakeDone) {
      const hello = parseHello(line);
      if (hello) {
        handshakeDone = true;
        state.connected = true;
        banner.classList.add("hidden");
      }
      return;
    }
    if (isError(line)) {
      console.error(line);
      return;
    }
    const det = parseDetection(line);
    if (det) applyDetection(state, det);
  });
  socket.addEventListener("close", () => {
    state.connected = false;
    handshakeDone = false;
    banner.classList.remove("hidden");
    setTimeout(connect, 1000);
  });
  socket.addEventListener("error", () => socket?.close());
}

function pointerSample(ev: PointerEvent, pressed: boolean) {
  const rect = canvas.getBoundingClientRect();
  const [gx, gy] = canvasToGel(view, ev.clientX - rect.left, ev.clientY - rect.top);
  return { pointerId: ev.pointerId, gx, gy, pressed, mirror: ev.shiftKey, tMs: now() };
}

canvas.addEventListener("pointerdown", (ev) => {
  canvas.setPointerCapture(ev.pointerId);
  const msgs = mapper.handle(pointerSample(ev, true));
  msgs.forEach((m) => {
    send(m);
    rememberFinger(m);
  });
});
canvas.addEventListener("pointermove", (ev) => {
  if (ev.buttons === 0) return;
  mapper.handle(pointerSample(ev, true)).forEach((m) => {
    send(m);
    rememberFinger(m);
  });
});
function release(ev: PointerEvent): void {
  mapper.handle(pointerSample(ev, false)).forEach((m) => {
    send(m);
    rememberFinger(m);
  });
}
canvas.addEventListener("pointerup", release);
canvas.addEventListener("pointercancel", release);

function rememberFinger(line: string): void {
  const kv = new Map(line.split(" ").slice(1).map((t) => t.split("=") as [string, string]));
  const id = parseInt(kv.get("id") ?? "0");
  if (kv.get("pressed") === "1") {
    state.fingers.set(id, [parseFloat(kv.get("x") ?? "0"), parseFloat(kv.get("y") ?? "0")]);
  } else {
    state.fingers.delete(id);
  }
}

traceButton.addEventListener("click", () => {
  const blob = new Blob([trace.join("\n") + "\n"], { type: "text/plain" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "input-trace.txt";
  a.click();
});

let lastTick = 0;
function loop(): void {
  const t = now();
  if (t - lastTick >= 15) {
    send(tickLine(t));
    lastTick = t;
  }
  drawFrame(ctx, view, state, canvas.width, canvas.height);
  label.textContent = statusText(state);
  const frac = intensityFraction(state);
  (meter as HTMLElement).style.width = `${(100 * frac).toFixed(1)}%`;
  meterText.textContent = state.lastDetection
    ? `${state.lastDetection.intensityMm.toFixed(2)} mm`
    : "";
  (activityPos as HTMLElement).style.height = `${Math.min(state.eventRate.pos / 6, 100)}px`;
  (activityNeg as HTMLElement).style.height = `${Math.min(state.eventRate.neg / 6, 100)}px`;
  requestAnimationFrame(loop);
}

connect();
requestAnimationFrame(loop);
