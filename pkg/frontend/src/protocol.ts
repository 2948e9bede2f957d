/**
 * Wire protocol "oikos/1": message envelopes, exact float codec, canonical
 * JSON and the SHA-256 state digest.
 *
 * Every float inside digest-bearing payloads travels as the 16-hex-digit
 * big-endian IEEE-754 bit pattern of the double, so the JSON layer only ever
 * carries strings, integers, booleans and nulls.  Canonical JSON is compact,
 * ASCII-escaped and key-sorted by code unit; the state digest is SHA-256
 * over that text.  Both must match the server byte for byte.
 */

export const PROTOCOL_VERSION = "oikos/1";

// --- envelopes -------------------------------------------------------------------

export interface Envelope {
  type: string;
  seq: number;
  payload: Record<string, unknown>;
}

export type Role = "controller" | "observer";

export interface AttachPayload {
  digest: string;
  done: boolean;
  initial_digest: string;
  protocol: string;
  recording: boolean;
  role: Role;
  scene_digest: string;
  seed: string;
  step: number;
  success: boolean;
  task: {
    goal: string[];
    id: string;
    initial: string[];
    scene: string;
    time_limit_steps: number;
    title: string;
  };
  taxonomy_digest: string;
}

export interface SnapshotPayload {
  step: number;
  digest: string;
  state: WireState;
  static: StaticPayload;
}

export interface DeltaPayload {
  step: number;
  digest: string;
  changes: DeltaChanges;
}

export interface DeltaChanges {
  objects?: MapDelta;
  droplets?: MapDelta;
  dynamic_models?: MapDelta;
  top?: Record<string, unknown>;
}

export interface MapDelta {
  remove?: string[];
  set?: Record<string, unknown>;
}

export type PredicateEvent =
  | { kind: "goal"; condition: string; value: boolean }
  | { kind: "tags"; instance: string; tags: string[] };

export interface PredicateEventsPayload {
  step: number;
  events: PredicateEvent[];
  success: boolean;
  done: boolean;
}

export interface ActionAckPayload {
  ack: number;
  step: number;
  digest: string;
  success: boolean;
  done: boolean;
  autoplay?: boolean;
}

export interface RecordAckPayload {
  ack: number;
  op: "start" | "stop" | "mark";
  recording: boolean;
  step: number;
  target?: string;
  label?: string;
  final_digest?: string;
  success?: boolean;
}

export interface ReplayAckPayload {
  ack: number;
  ok: boolean;
  final_digest?: string;
  steps?: number;
  success?: boolean;
  error?: Record<string, unknown>;
}

export interface ErrorPayload {
  code: "Busy" | "BadRequest" | "SessionFinished" | "ProtocolViolation";
  reason: string;
  ack?: number;
}

// --- wire state shapes -------------------------------------------------------------

export interface WirePose {
  pos: string[];
  orn: string[];
}

export interface WireParticle {
  active: boolean;
  id: number;
  kind: string;
  link: string;
  point: string[];
}

export interface WireObject {
  category: string;
  consumed: boolean;
  half_of: string | null;
  initial_dust: number;
  initial_stain: number;
  joints: Record<string, string>;
  max_temperature: string;
  model: string;
  particles: WireParticle[];
  pose: WirePose;
  sliced: boolean;
  temperature: string;
  toggled: boolean;
  wetness: number;
}

export interface WireDroplet {
  container: string | null;
  offset: string[] | null;
  position: string[];
  status: string;
  velocity: string[];
}

export interface WireGrasp {
  object: string;
  rel: WirePose;
}

export interface WireHand {
  grasp: WireGrasp | null;
  pose: WirePose;
  press: string;
  trigger: string;
}

export interface WireState {
  agent: {
    base_pos: string[];
    base_room: string;
    fov_half_angle: string;
    hands: Record<string, WireHand>;
    head_pose: WirePose;
  };
  config: { literal_temperature: boolean };
  counters: {
    droplet: number;
    instances: Record<string, number>;
    particle: number;
  };
  dirty: string[];
  droplets: Record<string, WireDroplet>;
  droplets_emitted: number;
  dynamic_models: Record<
    string,
    { category: string; half_extents: string[]; mass: string }
  >;
  grasp_order: Record<string, string[]>;
  objects: Record<string, WireObject>;
  rng: string | null;
  source_accumulators: Record<string, string>;
  toggle_contact_prev: string[];
}

export interface WireJoint {
  axis: string[];
  kind: "Prismatic" | "Revolute";
  range: [string, string];
}

export interface WireLink {
  colliding: boolean;
  id: string;
  joint: WireJoint | null;
  local_pose: WirePose;
  parent: string | null;
  shape:
    | { kind: "box"; half_extents: string[] }
    | { kind: "hull"; vertices: string[][] };
}

export interface WireModel {
  category: string;
  links: WireLink[];
  mass: string;
  virtual_links: Record<string, string>;
}

export interface StaticPayload {
  models: Record<string, WireModel>;
  rooms: Record<
    string,
    { floor_z: string; kind: string; polygon: string[][] }
  >;
}

// --- actions ---------------------------------------------------------------------

export type EncodedAction =
  | { kind: "noop" }
  | {
      kind: "move_hand";
      hand: string;
      linear: string[];
      angular: string[];
      press: string;
    }
  | { kind: "set_trigger"; hand: string; fraction: string }
  | { kind: "teleport_base"; point: string[] };

export function noop(): EncodedAction {
  return { kind: "noop" };
}

export function moveHand(
  hand: string,
  linear: readonly number[],
  angular: readonly number[] = [0, 0, 0],
  press = 0,
): EncodedAction {
  return {
    kind: "move_hand",
    hand,
    linear: linear.map(encodeF64),
    angular: angular.map(encodeF64),
    press: encodeF64(press),
  };
}

export function setTrigger(hand: string, fraction: number): EncodedAction {
  return { kind: "set_trigger", hand, fraction: encodeF64(fraction) };
}

export function teleportBase(x: number, y: number): EncodedAction {
  return { kind: "teleport_base", point: [encodeF64(x), encodeF64(y)] };
}

// --- exact float codec -------------------------------------------------------------

const f64Buf = new DataView(new ArrayBuffer(8));
const HEX = "0123456789abcdef";

/** Big-endian IEEE-754 bits of `x` as 16 lowercase hex digits. */
export function encodeF64(x: number): string {
  f64Buf.setFloat64(0, x, false);
  let out = "";
  for (let i = 0; i < 8; i++) {
    const b = f64Buf.getUint8(i);
    out += HEX[b >> 4]! + HEX[b & 0xf]!;
  }
  return out;
}

export function decodeF64(s: string): number {
  if (typeof s !== "string" || !/^[0-9a-f]{16}$/.test(s)) {
    throw new Error(`expected 16 hex digits, got ${JSON.stringify(s)}`);
  }
  for (let i = 0; i < 8; i++) {
    f64Buf.setUint8(i, parseInt(s.slice(2 * i, 2 * i + 2), 16));
  }
  return f64Buf.getFloat64(0, false);
}

export function decodeVec(items: readonly string[]): number[] {
  return items.map(decodeF64);
}

// --- canonical JSON ----------------------------------------------------------------

const SHORT_ESCAPES: Record<string, string> = {
  "\b": "\\b",
  "\t": "\\t",
  "\n": "\\n",
  "\f": "\\f",
  "\r": "\\r",
  '"': '\\"',
  "\\": "\\\\",
};

function escapeString(s: string): string {
  let out = '"';
  for (let i = 0; i < s.length; i++) {
    const ch = s[i]!;
    const code = s.charCodeAt(i);
    const short = SHORT_ESCAPES[ch];
    if (short !== undefined) {
      out += short;
    } else if (code < 0x20 || code > 0x7e) {
      // ASCII-only output; astral characters stay as escaped surrogate pairs.
      out += "\\u" + code.toString(16).padStart(4, "0");
    } else {
      out += ch;
    }
  }
  return out + '"';
}

/**
 * Deterministic JSON identical to the server's: keys sorted by code unit,
 * compact separators, ASCII escapes, and no raw floats — any non-integer
 * number is a bug upstream of serialization.
 */
export function canonicalJson(value: unknown): string {
  if (value === null) return "null";
  if (value === true) return "true";
  if (value === false) return "false";
  if (typeof value === "number") {
    if (!Number.isSafeInteger(value)) {
      throw new Error(`raw float ${value} in canonical JSON; hex-encode it`);
    }
    return Object.is(value, -0) ? "0" : String(value);
  }
  if (typeof value === "string") return escapeString(value);
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  if (typeof value === "object") {
    const obj = value as Record<string, unknown>;
    const keys = Object.keys(obj).sort(codePointCompare);
    const parts = keys.map((k) => escapeString(k) + ":" + canonicalJson(obj[k]));
    return "{" + parts.join(",") + "}";
  }
  throw new Error(`unsupported value in canonical JSON: ${typeof value}`);
}

/** Compare by Unicode code point (not UTF-16 unit), as the server sorts. */
function codePointCompare(a: string, b: string): number {
  const as = Array.from(a);
  const bs = Array.from(b);
  const n = Math.min(as.length, bs.length);
  for (let i = 0; i < n; i++) {
    const d = as[i]!.codePointAt(0)! - bs[i]!.codePointAt(0)!;
    if (d !== 0) return d;
  }
  return as.length - bs.length;
}

// --- digests ---------------------------------------------------------------------

/** SHA-256 hex of canonical JSON; matches the server's state digest. */
export async function stateDigest(wire: unknown): Promise<string> {
  const text = canonicalJson(wire);
  const bytes = new TextEncoder().encode(text);
  const hash = await crypto.subtle.digest("SHA-256", bytes);
  const view = new Uint8Array(hash);
  let out = "";
  for (const b of view) out += HEX[b >> 4]! + HEX[b & 0xf]!;
  return out;
}

// --- conditions (string syntax only; truth always comes from the kernel) -----------

export interface ParsedCondition {
  name: string;
  args: string[];
  target: boolean;
}

const CONDITION_RE =
  /^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(\s*([^()]*?)\s*\)\s*=\s*(true|false)\s*$/;

export function parseCondition(text: string): ParsedCondition | null {
  const m = CONDITION_RE.exec(text);
  if (!m) return null;
  const rawArgs = m[2]!.trim();
  const args = rawArgs === "" ? [] : rawArgs.split(",").map((a) => a.trim());
  if (args.some((a) => !/^[A-Za-z0-9_][A-Za-z0-9_.\-]*$/.test(a))) return null;
  return { name: m[1]!, args, target: m[3] === "true" };
}

/** Whitespace-normalized key, matching the server's condition rendering. */
export function conditionKey(c: ParsedCondition): string {
  return `${c.name}(${c.args.join(", ")})=${c.target ? "true" : "false"}`;
}
