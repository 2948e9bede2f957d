/**
 * Protocol client for one "oikos/1" connection.
 *
 * Owns the hello handshake, outbound sequence numbers, acknowledgment
 * correlation and the session mirror.  Inbound messages are processed
 * strictly in arrival order (digest verification is asynchronous, so a
 * promise chain serializes the folds).  On a digest desync the client tears
 * the connection down and reconnects: a fresh attach carries a full
 * snapshot, which is the protocol's resync mechanism.
 */

import type {
  ActionAckPayload,
  AttachPayload,
  EncodedAction,
  Envelope,
  ErrorPayload,
  PredicateEventsPayload,
  RecordAckPayload,
  ReplayAckPayload,
  Role,
} from "./protocol.js";
import { PROTOCOL_VERSION } from "./protocol.js";
import type { MirrorUpdate } from "./state.js";
import { SessionMirror } from "./state.js";

/** Maximum action messages in flight; mirrors the server's backpressure cap. */
export const MAX_UNACKED_ACTIONS = 8;

export interface SocketLike {
  send(data: string): void;
  close(code?: number, reason?: string): void;
  addEventListener(type: "open", listener: () => void): void;
  addEventListener(type: "close", listener: (ev: { code?: number }) => void): void;
  addEventListener(type: "error", listener: (ev: unknown) => void): void;
  addEventListener(
    type: "message",
    listener: (ev: { data: unknown }) => void,
  ): void;
}

export type SocketFactory = () => SocketLike;

export interface ClientEvents {
  attach?: (payload: AttachPayload) => void;
  update?: (update: MirrorUpdate) => void;
  predicateEvents?: (payload: PredicateEventsPayload) => void;
  serverError?: (payload: ErrorPayload) => void;
  bye?: (reason: string) => void;
  close?: () => void;
  resync?: (attempt: number) => void;
}

export class ServerError extends Error {
  readonly code: ErrorPayload["code"];

  constructor(payload: ErrorPayload) {
    super(`${payload.code}: ${payload.reason}`);
    this.code = payload.code;
  }
}

interface PendingRequest {
  resolve: (envelope: Envelope) => void;
  reject: (err: Error) => void;
  isAction: boolean;
}

export class BridgeClient {
  readonly mirror = new SessionMirror();
  attach: AttachPayload | null = null;

  private socket: SocketLike | null = null;
  private seq = 0;
  private pending = new Map<number, PendingRequest>();
  private inbox: Promise<void> = Promise.resolve();
  private attachWaiters: Array<() => void> = [];
  private snapshotSeen = false;
  private closedByUs = false;
  private resyncAttempts = 0;

  constructor(
    private readonly factory: SocketFactory,
    private readonly role: Role,
    private readonly events: ClientEvents = {},
  ) {}

  /** Number of action messages awaiting acknowledgment. */
  get inFlight(): number {
    let n = 0;
    for (const p of this.pending.values()) if (p.isAction) n++;
    return n;
  }

  /** False while the backpressure window is full; inputs should disable. */
  get canSend(): boolean {
    return this.socket !== null && this.inFlight < MAX_UNACKED_ACTIONS;
  }

  get recording(): boolean {
    return this.attach?.recording ?? false;
  }

  /** Open the socket, say hello and wait for attach plus first snapshot. */
  async connect(): Promise<AttachPayload> {
    this.closedByUs = false;
    this.snapshotSeen = false;
    const socket = this.factory();
    this.socket = socket;
    socket.addEventListener("open", () => {
      this.sendEnvelope("hello", { protocol: PROTOCOL_VERSION, role: this.role });
    });
    socket.addEventListener("message", (ev) => {
      const text = typeof ev.data === "string" ? ev.data : String(ev.data);
      this.inbox = this.inbox.then(() => this.handleMessage(text));
    });
    socket.addEventListener("close", () => {
      if (this.socket === socket) this.socket = null;
      this.failPending(new Error("connection closed"));
      this.events.close?.();
    });
    socket.addEventListener("error", () => {
      /* the close event carries the teardown */
    });
    await new Promise<void>((resolve) => this.attachWaiters.push(resolve));
    return this.attach!;
  }

  disconnect(): void {
    this.closedByUs = true;
    if (this.socket === null) return;
    this.sendEnvelope("bye", {});
    this.socket.close(1000, "goodbye");
    this.socket = null;
  }

  /** Send one action message; resolves with the acknowledgment payload. */
  sendActions(actions: EncodedAction[]): Promise<ActionAckPayload> {
    return this.request<ActionAckPayload>("action", { actions });
  }

  setAutoplay(rate: number): Promise<ActionAckPayload> {
    return this.request<ActionAckPayload>("action", { op: "autoplay", rate });
  }

  recordControl(
    payload: { op: "start"; target: string } | { op: "stop" } | { op: "mark"; label: string },
  ): Promise<RecordAckPayload> {
    return this.request<RecordAckPayload>("record_control", payload);
  }

  replayVerify(source: string): Promise<ReplayAckPayload> {
    return this.request<ReplayAckPayload>("replay_control", {
      op: "verify",
      source,
    });
  }

  // --- internals -------------------------------------------------------------------

  private sendEnvelope(type: string, payload: Record<string, unknown>): number {
    if (this.socket === null) throw new Error("not connected");
    this.seq += 1;
    this.socket.send(JSON.stringify({ payload, seq: this.seq, type }));
    return this.seq;
  }

  private request<T>(
    type: "action" | "record_control" | "replay_control",
    payload: Record<string, unknown>,
  ): Promise<T> {
    const seq = this.sendEnvelope(type, payload);
    return new Promise((resolve, reject) => {
      this.pending.set(seq, {
        isAction: type === "action",
        resolve: (envelope) => resolve(envelope.payload as unknown as T),
        reject,
      });
    });
  }

  private failPending(err: Error): void {
    for (const p of this.pending.values()) p.reject(err);
    this.pending.clear();
  }

  private async handleMessage(text: string): Promise<void> {
    let envelope: Envelope;
    try {
      envelope = JSON.parse(text) as Envelope;
    } catch {
      return; // not protocol JSON; nothing sane to do with it
    }
    switch (envelope.type) {
      case "attach": {
        this.attach = envelope.payload as unknown as AttachPayload;
        this.events.attach?.(this.attach);
        break;
      }
      case "snapshot": {
        const update = await this.mirror.applySnapshot(
          envelope.payload as never,
        );
        this.events.update?.(update);
        if (!this.snapshotSeen) {
          this.snapshotSeen = true;
          this.resyncAttempts = 0;
          const waiters = this.attachWaiters;
          this.attachWaiters = [];
          for (const w of waiters) w();
        }
        break;
      }
      case "delta": {
        const update = await this.mirror.applyDelta(envelope.payload as never);
        this.events.update?.(update);
        if (update.kind === "desync") this.resync();
        break;
      }
      case "predicate_events": {
        const payload = envelope.payload as unknown as PredicateEventsPayload;
        if (this.attach !== null) {
          this.attach.success = payload.success;
          this.attach.done = payload.done;
        }
        this.events.predicateEvents?.(payload);
        break;
      }
      case "action":
      case "record_control":
      case "replay_control": {
        const payload = envelope.payload as Record<string, unknown>;
        if (envelope.type === "record_control" && this.attach !== null) {
          this.attach.recording = Boolean(payload.recording);
        }
        if (envelope.type === "action" && this.attach !== null) {
          if (typeof payload.success === "boolean") this.attach.success = payload.success;
          if (typeof payload.done === "boolean") this.attach.done = payload.done;
        }
        this.settle(payload.ack, (req) => req.resolve(envelope));
        break;
      }
      case "error": {
        const payload = envelope.payload as unknown as ErrorPayload;
        this.events.serverError?.(payload);
        if (payload.code === "ProtocolViolation") {
          // The server closes the connection after this; every request in
          // flight dies of the same cause, so report the real reason.
          this.failPending(new ServerError(payload));
        } else {
          this.settle(payload.ack, (req) => req.reject(new ServerError(payload)));
        }
        break;
      }
      case "bye": {
        const reason = String(
          (envelope.payload as Record<string, unknown>).reason ?? "",
        );
        this.events.bye?.(reason);
        break;
      }
      default:
        break; // unknown server message; ignore rather than guess
    }
  }

  private settle(
    ack: unknown,
    action: (req: PendingRequest) => void,
  ): void {
    if (typeof ack !== "number") return;
    const req = this.pending.get(ack);
    if (req === undefined) return;
    this.pending.delete(ack);
    action(req);
  }

  /**
   * Drop the connection and reattach; the fresh snapshot restores sync.
   * The reconnect is deliberately not awaited: connect() only resolves once
   * the new snapshot is processed on this same inbox chain, so waiting here
   * would deadlock the handler that detected the desync.
   */
  private resync(): void {
    if (this.closedByUs) return;
    this.resyncAttempts += 1;
    this.events.resync?.(this.resyncAttempts);
    this.socket?.close(1000, "resync");
    this.socket = null;
    this.failPending(new Error("resync"));
    void this.connect().catch(() => {
      /* the close event already told the owner */
    });
  }
}
