/**
 * Demo recorder model: a small state machine over record_control.
 *
 * The server owns the actual log file; this model tracks what the kernel
 * acknowledged, guards the controls client-side (start only before the first
 * step, no recording while recording, stop/mark only while recording) and
 * lists finished logs with their final digests so they can be downloaded and
 * replayed offline.
 */

import type { RecordAckPayload } from "./protocol.js";

export interface Marker {
  step: number;
  label: string;
}

export interface FinishedLog {
  target: string;
  finalDigest: string;
  steps: number;
  success: boolean;
  markers: Marker[];
  /** Server-side replay verification outcome, once requested. */
  verified: boolean | null;
}

export type RecorderPhase = "idle" | "recording";

export class RecorderModel {
  phase: RecorderPhase = "idle";
  target: string | null = null;
  startedAtStep: number | null = null;
  markers: Marker[] = [];
  readonly finished: FinishedLog[] = [];

  /** Reason the control is disabled, or null when the op is allowed. */
  guardStart(currentStep: number, target: string): string | null {
    if (this.phase === "recording") return "already recording";
    if (currentStep !== 0) return "recording must start before the first step";
    if (target.trim() === "") return "needs a target file name";
    return null;
  }

  guardStop(): string | null {
    return this.phase === "recording" ? null : "not recording";
  }

  guardMark(): string | null {
    return this.phase === "recording" ? null : "not recording";
  }

  onStartAck(ack: RecordAckPayload): void {
    this.phase = "recording";
    this.target = ack.target ?? null;
    this.startedAtStep = ack.step;
    this.markers = [];
  }

  onMarkAck(ack: RecordAckPayload): void {
    this.markers.push({ step: ack.step, label: ack.label ?? "" });
  }

  onStopAck(ack: RecordAckPayload): FinishedLog {
    const entry: FinishedLog = {
      target: this.target ?? "",
      finalDigest: ack.final_digest ?? "",
      steps: ack.step,
      success: ack.success ?? false,
      markers: this.markers,
      verified: null,
    };
    this.finished.push(entry);
    this.phase = "idle";
    this.target = null;
    this.startedAtStep = null;
    this.markers = [];
    return entry;
  }

  onVerify(target: string, ok: boolean): void {
    const entry = this.finished.find((f) => f.target === target);
    if (entry !== undefined) entry.verified = ok;
  }

  /**
   * HTTP path for downloading a finished log from the same server.  Works
   * when the recording target was a relative path and the server's working
   * directory is the served static directory; absolute targets have no
   * download URL.
   */
  static downloadPath(target: string): string | null {
    if (target.startsWith("/") || /^[A-Za-z]:[\\/]/.test(target)) return null;
    return "/" + target.split("\\").join("/");
  }
}
