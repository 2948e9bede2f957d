/**
 * Predicate panel model: a live truth table over the task's goal conditions
 * plus user-added instance watches, with a step-stamped flip history.
 *
 * The panel never computes predicate truth itself.  Goal rows change only
 * when the kernel sends a goal event; watch rows change only when the kernel
 * sends a tags event or a state delta carries the literal flag bits
 * (toggled/sliced/wetness are kernel state, not client inference).  The
 * success banner follows the kernel's reported success flag exactly.
 */

import type { PredicateEventsPayload, WireObject } from "./protocol.js";
import { conditionKey, parseCondition } from "./protocol.js";

export interface Flip<T> {
  step: number;
  value: T;
}

export interface GoalRow {
  /** Normalized condition key, e.g. "Cooked(meat_1)=true". */
  key: string;
  /** The raw goal line from the task. */
  text: string;
  /** Last kernel-reported truth of the condition; null until the first event. */
  value: boolean | null;
  flips: Flip<boolean>[];
}

export interface WatchRow {
  instance: string;
  /** Inline error for watches on instances the scene does not contain. */
  error: string | null;
  /** Last kernel-sent appearance tag set; null until the first tags event. */
  tags: string[] | null;
  /** Literal state bits mirrored straight out of the last snapshot/delta. */
  flags: { toggled: boolean; sliced: boolean; wetness: number } | null;
  flips: Flip<string[]>[];
}

export interface FeedEntry {
  step: number;
  text: string;
}

const FEED_LIMIT = 200;

export class PredicatePanel {
  readonly goals: GoalRow[];
  readonly watches: WatchRow[] = [];
  readonly feed: FeedEntry[] = [];
  success = false;
  done = false;
  /** First step at which the kernel reported the goal conjunction true. */
  successStep: number | null = null;

  constructor(goalLines: readonly string[]) {
    this.goals = goalLines.map((text) => {
      const parsed = parseCondition(text);
      return {
        key: parsed === null ? text.trim() : conditionKey(parsed),
        text,
        value: null,
        flips: [],
      };
    });
  }

  addWatch(instance: string, knownInstances: readonly string[]): WatchRow {
    const error = knownInstances.includes(instance)
      ? null
      : `no instance named ${JSON.stringify(instance)} in this scene`;
    const row: WatchRow = { instance, error, tags: null, flags: null, flips: [] };
    this.watches.push(row);
    return row;
  }

  removeWatch(instance: string): void {
    const i = this.watches.findIndex((w) => w.instance === instance);
    if (i >= 0) this.watches.splice(i, 1);
  }

  /** Fold one predicate_events message into the table and the feed. */
  ingest(payload: PredicateEventsPayload): void {
    for (const event of payload.events) {
      if (event.kind === "goal") {
        const parsed = parseCondition(event.condition);
        const key = parsed === null ? event.condition : conditionKey(parsed);
        const row = this.goals.find((g) => g.key === key);
        if (row !== undefined) {
          row.value = event.value;
          row.flips.push({ step: payload.step, value: event.value });
        }
        this.pushFeed(payload.step, `${event.condition.replace(/=(true|false)$/, "")} -> ${event.value}`);
      } else if (event.kind === "tags") {
        const row = this.watches.find(
          (w) => w.instance === event.instance && w.error === null,
        );
        if (row !== undefined) {
          row.tags = [...event.tags];
          row.flips.push({ step: payload.step, value: [...event.tags] });
        }
        this.pushFeed(
          payload.step,
          `${event.instance} tags: ${event.tags.length > 0 ? event.tags.join(", ") : "(none)"}`,
        );
      }
    }
    this.noteKernelStatus(payload.step, payload.success, payload.done);
  }

  /** Kernel-reported status also rides on attach and action acknowledgments. */
  noteKernelStatus(step: number, success: boolean, done: boolean): void {
    if (success && !this.success) {
      this.successStep = step;
      this.pushFeed(step, "goal conjunction TRUE");
    }
    this.success = success;
    this.done = done;
  }

  /** Mirror literal per-object flag bits from the latest folded state. */
  refreshFlags(objects: Record<string, WireObject>): void {
    for (const row of this.watches) {
      const obj = objects[row.instance];
      row.flags =
        obj === undefined
          ? null
          : { toggled: obj.toggled, sliced: obj.sliced, wetness: obj.wetness };
    }
  }

  private pushFeed(step: number, text: string): void {
    this.feed.push({ step, text });
    if (this.feed.length > FEED_LIMIT) this.feed.splice(0, this.feed.length - FEED_LIMIT);
  }
}
