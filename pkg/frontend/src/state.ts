/** Pure view-state for the tuning UI: no DOM, no network. */

export type CompareMode = "side-by-side" | "wipe";

export interface ModelInfo {
  task: string;
  level_range: [number, number];
  has_estimator: boolean;
}

export interface Pin {
  level: number;
  /** object URL of the snapshot blob; never replaced once created */
  url: string;
}

export interface ViewState {
  sessionId: string | null;
  level: number;
  model: ModelInfo | null;
  mode: CompareMode;
  pins: Pin[];
  /** divider position in [0,1]; persists across slider moves */
  wipePosition: number;
  estimatedLevel: number | null;
}

export interface SliderBounds {
  min: number;
  max: number;
  step: number;
  /** trained span; outside it the UI marks the extrapolation zone */
  trainedMin: number;
  trainedMax: number;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    level: 0,
    model: null,
    mode: "side-by-side",
    pins: [],
    wipePosition: 0.5,
    estimatedLevel: null,
  };
}

/** Slider spans the trained range extended by 25% on each side. */
export function sliderBounds(model: ModelInfo): SliderBounds {
  const [lo, hi] = model.level_range;
  const span = hi - lo;
  return {
    min: lo - 0.25 * span,
    max: hi + 0.25 * span,
    step: span / 200,
    trainedMin: lo,
    trainedMax: hi,
  };
}

export function isExtrapolated(level: number, model: ModelInfo): boolean {
  const [lo, hi] = model.level_range;
  return level < lo || level > hi;
}

export function clampToSlider(level: number, model: ModelInfo): number {
  const b = sliderBounds(model);
  return Math.min(b.max, Math.max(b.min, level));
}

export function withSession(
  state: ViewState,
  sessionId: string,
  model: ModelInfo,
  estimatedLevel: number | null,
): ViewState {
  const mid = (model.level_range[0] + model.level_range[1]) / 2;
  const level = estimatedLevel ?? mid;
  return {
    ...state,
    sessionId,
    model,
    estimatedLevel,
    level: clampToSlider(level, model),
    pins: [],
  };
}

export function withLevel(state: ViewState, level: number): ViewState {
  if (!state.model) return state;
  return { ...state, level: clampToSlider(level, state.model) };
}

export function jumpToEstimate(state: ViewState): ViewState {
  if (state.estimatedLevel === null) return state;
  return withLevel(state, state.estimatedLevel);
}

/** Pins are append-only snapshots; existing entries are never mutated. */
export function addPin(state: ViewState, url: string): ViewState {
  const pin: Pin = { level: state.level, url };
  return { ...state, pins: [...state.pins, pin] };
}

export function removePin(state: ViewState, index: number): ViewState {
  return { ...state, pins: state.pins.filter((_, i) => i !== index) };
}

export function withMode(state: ViewState, mode: CompareMode): ViewState {
  return { ...state, mode };
}

export function withWipePosition(state: ViewState, position: number): ViewState {
  return { ...state, wipePosition: Math.min(1, Math.max(0, position)) };
}
