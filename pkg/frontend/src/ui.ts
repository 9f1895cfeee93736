/**
 * DOM wiring: upload panels, mode selector, sliders, seed field, and the
 * result / mask-overlay / residual-heat views.
 */

import { StudioApi, type TransferResponse } from "./api.js";
import { TransferController } from "./controller.js";
import {
  clampAlpha,
  displayedWeights,
  initialState,
  type StudioState,
} from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function pngUrl(b64: string): string {
  return `data:image/png;base64,${b64}`;
}

export class StudioView {
  private state: StudioState = initialState();
  private readonly api: StudioApi;
  private readonly controller: TransferController;
  private maskVisible = false;

  constructor(baseUrl = "") {
    this.api = new StudioApi(baseUrl);
    this.controller = new TransferController(this.api, {
      onResult: (response) => this.render(response),
      onError: (error) => this.showError(error),
      onRequest: () => this.setStatus("rendering…"),
    });
    this.bind();
  }

  private bind(): void {
    el<HTMLInputElement>("source-file").addEventListener("change", (event) => {
      void this.uploadSource((event.target as HTMLInputElement).files?.[0]);
    });
    el<HTMLInputElement>("reference-file").addEventListener("change", (event) => {
      void this.addReference((event.target as HTMLInputElement).files?.[0]);
    });
    el<HTMLSelectElement>("mode").addEventListener("change", (event) => {
      this.state.mode = (event.target as HTMLSelectElement).value as StudioState["mode"];
      this.refreshPanels();
      this.controller.update(this.state);
    });
    const alphaSlider = el<HTMLInputElement>("alpha");
    alphaSlider.addEventListener("input", () => {
      this.state.alpha = clampAlpha(parseFloat(alphaSlider.value));
      el("alpha-value").textContent = this.state.alpha.toFixed(2);
      this.controller.update(this.state);
    });
    el<HTMLInputElement>("seed").addEventListener("change", (event) => {
      this.state.seed = Math.trunc(Number((event.target as HTMLInputElement).value)) || 0;
      this.controller.update(this.state);
    });
    el<HTMLButtonElement>("resample").addEventListener("click", () => {
      this.state.seed = Math.floor(Math.random() * 1_000_000);
      el<HTMLInputElement>("seed").value = String(this.state.seed);
      void this.controller.issueNow(this.state);
    });
    el<HTMLButtonElement>("toggle-mask").addEventListener("click", () => {
      this.maskVisible = !this.maskVisible;
      el("mask-overlay").style.opacity = this.maskVisible ? "0.6" : "0";
    });
  }

  private async uploadSource(file?: File): Promise<void> {
    if (!file) return;
    try {
      const body = await this.api.uploadImage(file, file.name);
      this.state.sourceId = body.image_id;
      el("source-code").textContent = body.makeup_code.map((v) => v.toFixed(3)).join(", ");
      el<HTMLImageElement>("source-preview").src = URL.createObjectURL(file);
      this.controller.update(this.state);
    } catch (error) {
      this.showError(error);
    }
  }

  private async addReference(file?: File): Promise<void> {
    if (!file) return;
    try {
      const body = await this.api.uploadImage(file, file.name);
      this.state.references.push({ imageId: body.image_id, weight: 1 });
      this.renderReferenceList();
      this.controller.update(this.state);
    } catch (error) {
      this.showError(error);
    }
  }

  private renderReferenceList(): void {
    const list = el("reference-list");
    list.innerHTML = "";
    const weights = displayedWeights(this.state);
    this.state.references.forEach((ref, k) => {
      const row = document.createElement("div");
      row.className = "reference-row";
      const label = document.createElement("span");
      label.textContent = `${ref.imageId.slice(0, 8)} · ${weights[k].toFixed(3)}`;
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = "0";
      slider.max = "1";
      slider.step = "0.01";
      slider.value = String(ref.weight);
      slider.addEventListener("input", () => {
        ref.weight = parseFloat(slider.value);
        this.renderReferenceList();
        this.controller.update(this.state);
      });
      row.append(label, slider);
      list.append(row);
    });
  }

  private refreshPanels(): void {
    el("alpha-panel").style.display = this.state.mode === "interpolated" ? "" : "none";
    el("seed-panel").style.display = this.state.mode === "multimodal" ? "" : "none";
  }

  private render(response: TransferResponse): void {
    this.state.lastResult = {
      resultPng: response.result_png,
      maskPng: response.mask_png,
      residualPng: response.residual_png,
      params: response.params,
    };
    el<HTMLImageElement>("result").src = pngUrl(response.result_png);
    el<HTMLImageElement>("mask-overlay").src = pngUrl(response.mask_png);
    el<HTMLImageElement>("residual").src = pngUrl(response.residual_png);
    el("params-echo").textContent = JSON.stringify(response.params, null, 2);
    this.setStatus("");
  }

  private showError(error: unknown): void {
    this.setStatus(error instanceof Error ? error.message : String(error));
  }

  private setStatus(text: string): void {
    el("status").textContent = text;
  }
}
