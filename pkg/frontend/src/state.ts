/**
 * Studio state and the pure rules the UI must never break: the alpha slider
 * stays in [0, 1] and hybrid weights are normalized before they are either
 * displayed or sent.
 */

import type { TransferMode, TransferRequest } from "./api.js";

export interface ReferenceEntry {
  imageId: string;
  /** Raw slider position; display and requests always use the normalized value. */
  weight: number;
}

export interface ResultViews {
  resultPng: string;
  maskPng: string;
  residualPng: string;
  /** Server-echoed parameters, shown verbatim. */
  params: Record<string, unknown>;
}

export interface StudioState {
  sourceId: string | null;
  references: ReferenceEntry[];
  alpha: number;
  mode: TransferMode;
  seed: number;
  lastResult: ResultViews | null;
}

export function initialState(): StudioState {
  return {
    sourceId: null,
    references: [],
    alpha: 1.0,
    mode: "pairwise",
    seed: 0,
    lastResult: null,
  };
}

export function clampAlpha(value: number): number {
  if (Number.isNaN(value)) return 0;
  return Math.min(1, Math.max(0, value));
}

/**
 * Normalize raw slider weights to sum exactly 1. All-zero (or negative-only)
 * slider positions fall back to an equal split so the invariant holds for
 * every displayed state.
 */
export function normalizedWeights(references: ReferenceEntry[]): number[] {
  const raw = references.map((r) => Math.max(0, r.weight));
  const total = raw.reduce((a, b) => a + b, 0);
  if (total <= 0) {
    return references.map(() => 1 / references.length);
  }
  return raw.map((w) => w / total);
}

export function displayedWeights(state: StudioState): number[] {
  return state.references.length ? normalizedWeights(state.references) : [];
}

/** True when the state has everything the selected mode needs. */
export function requestReady(state: StudioState): boolean {
  if (!state.sourceId) return false;
  switch (state.mode) {
    case "reconstruct":
    case "multimodal":
      return true;
    case "pairwise":
    case "interpolated":
      return state.references.length >= 1;
    case "hybrid":
      return state.references.length >= 1;
  }
}

/** Assemble the request for the current state; throws if it is incomplete. */
export function buildRequest(state: StudioState): TransferRequest {
  if (!state.sourceId) {
    throw new Error("no source image uploaded");
  }
  const base = { source_id: state.sourceId };
  switch (state.mode) {
    case "reconstruct":
      return { ...base, mode: "reconstruct" };
    case "pairwise":
      return { ...base, mode: "pairwise", reference_id: requireReference(state) };
    case "interpolated":
      return {
        ...base,
        mode: "interpolated",
        reference_id: requireReference(state),
        alpha: clampAlpha(state.alpha),
      };
    case "hybrid":
      return {
        ...base,
        mode: "hybrid",
        reference_ids: state.references.map((r) => r.imageId),
        weights: normalizedWeights(state.references),
      };
    case "multimodal":
      return { ...base, mode: "multimodal", seed: state.seed };
  }
}

function requireReference(state: StudioState): string {
  if (!state.references.length) {
    throw new Error("no reference image uploaded");
  }
  return state.references[0].imageId;
}
