/**
 * Debounced transfer issuing with stale-response suppression.
 *
 * Slider drags produce bursts of parameter changes; only the last state in a
 * ~150 ms window becomes a request (inference latency dominates, so tighter
 * debouncing buys nothing). Every request carries a sequence number and a
 * response only renders while it is still the newest one, so a slow early
 * response can never overwrite a fresher result.
 */

import type { StudioApi, TransferResponse } from "./api.js";
import { buildRequest, requestReady, type StudioState } from "./state.js";

export const DEBOUNCE_MS = 150;

export interface ControllerHooks {
  onResult: (response: TransferResponse) => void;
  onError: (error: unknown) => void;
  /** Optional: observe issued requests (used by tests and the request log). */
  onRequest?: (sequence: number) => void;
}

export class TransferController {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private sequence = 0;
  private rendered = 0;
  private pendingState: StudioState | null = null;

  constructor(
    private readonly api: StudioApi,
    private readonly hooks: ControllerHooks,
    private readonly debounceMs: number = DEBOUNCE_MS,
  ) {}

  /** Record a parameter change; the request fires after the debounce window. */
  update(state: StudioState): void {
    if (!requestReady(state)) return;
    this.pendingState = state;
    if (this.timer !== null) {
      clearTimeout(this.timer);
    }
    this.timer = setTimeout(() => {
      this.timer = null;
      const snapshot = this.pendingState;
      this.pendingState = null;
      if (snapshot) void this.issue(snapshot);
    }, this.debounceMs);
  }

  /** Issue immediately, bypassing the debounce (e.g. button clicks). */
  issueNow(state: StudioState): Promise<void> {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
      this.pendingState = null;
    }
    return this.issue(state);
  }

  private async issue(state: StudioState): Promise<void> {
    const mine = ++this.sequence;
    this.hooks.onRequest?.(mine);
    try {
      const response = await this.api.transfer(buildRequest(state));
      if (mine > this.rendered && mine === this.sequence) {
        this.rendered = mine;
        this.hooks.onResult(response);
      }
      // otherwise: superseded by a newer request; drop silently
    } catch (error) {
      if (mine === this.sequence) {
        this.hooks.onError(error);
      }
    }
  }

  get issuedCount(): number {
    return this.sequence;
  }
}
