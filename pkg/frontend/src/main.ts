/** DOM wiring for the tuning page. All server access is read-only. */

import { TunerApi } from "./api.js";
import { RestoreQueue } from "./queue.js";
import {
  ViewState,
  addPin,
  initialState,
  isExtrapolated,
  jumpToEstimate,
  removePin,
  sliderBounds,
  withLevel,
  withMode,
  withSession,
  withWipePosition,
} from "./state.js";
import { positionFromPointer, wipeLayout } from "./wipe.js";

const api = new TunerApi();
let state: ViewState = initialState();
let originalUrl: string | null = null;
let restoredUrl: string | null = null;
let displayedLevel: number | null = null;

const el = (id: string) => document.getElementById(id)!;

const queue = new RestoreQueue(
  (level) => api.restore(state.sessionId!, level),
  (level, blob) => {
    if (restoredUrl) URL.revokeObjectURL(restoredUrl);
    restoredUrl = URL.createObjectURL(blob);
    displayedLevel = level;
    render();
  },
  120,
  () => toast("restore request failed; keeping the last image"),
);

function toast(message: string): void {
  const box = el("toast");
  box.textContent = message;
  box.classList.add("visible");
  setTimeout(() => box.classList.remove("visible"), 2500);
}

function render(): void {
  const slider = el("level") as HTMLInputElement;
  const readout = el("level-readout");
  if (state.model) {
    const b = sliderBounds(state.model);
    slider.min = String(b.min);
    slider.max = String(b.max);
    slider.step = String(b.step);
    slider.value = String(state.level);
    slider.disabled = state.sessionId === null;
    const zone = isExtrapolated(state.level, state.model) ? " (extrapolating)" : "";
    readout.textContent = `${state.level.toFixed(2)}${zone}`;
    readout.classList.toggle("extrapolated", isExtrapolated(state.level, state.model));
  }
  (el("estimate-btn") as HTMLButtonElement).disabled =
    state.estimatedLevel === null;
  (el("pin-btn") as HTMLButtonElement).disabled =
    restoredUrl === null || displayedLevel !== state.level;

  const original = el("original") as HTMLImageElement;
  const restored = el("restored") as HTMLImageElement;
  if (originalUrl) original.src = originalUrl;
  if (restoredUrl) restored.src = restoredUrl;
  el("displayed-level").textContent =
    displayedLevel === null ? "-" : displayedLevel.toFixed(2);

  const wipePane = el("compare");
  wipePane.classList.toggle("wipe-mode", state.mode === "wipe");
  if (state.mode === "wipe" && restoredUrl) {
    const layout = wipeLayout(state.wipePosition, wipePane.clientWidth);
    restored.style.clipPath = layout.rightClip;
    (el("divider") as HTMLElement).style.left = `${layout.dividerX}px`;
  } else {
    restored.style.clipPath = "";
  }

  const pinsBox = el("pins");
  pinsBox.innerHTML = "";
  state.pins.forEach((pin, i) => {
    const card = document.createElement("div");
    card.className = "pin";
    const img = document.createElement("img");
    img.src = pin.url;
    const label = document.createElement("span");
    label.textContent = `level ${pin.level.toFixed(2)}`;
    const drop = document.createElement("button");
    drop.textContent = "remove";
    drop.onclick = () => {
      state = removePin(state, i);
      render();
    };
    card.append(img, label, drop);
    pinsBox.append(card);
  });
}

async function boot(): Promise<void> {
  const upload = el("upload") as HTMLInputElement;
  upload.onchange = async () => {
    const file = upload.files?.[0];
    if (!file) return;
    try {
      const [info, model] = [await api.openSession(file), await api.model()];
      if (originalUrl) URL.revokeObjectURL(originalUrl);
      originalUrl = URL.createObjectURL(file);
      restoredUrl = null;
      displayedLevel = null;
      state = withSession(state, info.session_id, model, info.estimated_level ?? null);
      queue.request(state.level);
      render();
    } catch (err) {
      toast(`upload failed: ${err}`);
    }
  };

  const slider = el("level") as HTMLInputElement;
  slider.oninput = () => {
    state = withLevel(state, Number(slider.value));
    queue.request(state.level);
    render();
  };

  el("estimate-btn").onclick = () => {
    state = jumpToEstimate(state);
    queue.request(state.level);
    render();
  };

  el("pin-btn").onclick = () => {
    if (!restoredUrl) return;
    // snapshot keeps its own object URL; later slider moves never touch it
    fetch(restoredUrl)
      .then((r) => r.blob())
      .then((blob) => {
        state = addPin(state, URL.createObjectURL(blob));
        render();
      });
  };

  (el("mode") as HTMLSelectElement).onchange = (ev) => {
    state = withMode(state, (ev.target as HTMLSelectElement).value as never);
    render();
  };

  const compare = el("compare");
  let dragging = false;
  compare.addEventListener("pointerdown", (ev) => {
    if (state.mode !== "wipe") return;
    dragging = true;
    compare.setPointerCapture(ev.pointerId);
  });
  compare.addEventListener("pointermove", (ev) => {
    if (!dragging || state.mode !== "wipe") return;
    const rect = compare.getBoundingClientRect();
    state = withWipePosition(state, positionFromPointer(ev.clientX, rect));
    render();
  });
  compare.addEventListener("pointerup", () => {
    dragging = false;
  });

  try {
    const model = await api.model();
    state = { ...state, model };
  } catch {
    toast("service has no checkpoint loaded yet");
  }
  render();
}

boot();
