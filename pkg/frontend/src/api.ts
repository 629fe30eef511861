/** Typed client for the tuning service (read-only usage). */

import type { ModelInfo } from "./state.js";

export interface SessionInfo {
  session_id: string;
  width: number;
  height: number;
  estimated_level?: number;
}

export class TunerApi {
  constructor(private base: string = "") {}

  async model(): Promise<ModelInfo> {
    const resp = await fetch(`${this.base}/api/model`);
    if (!resp.ok) throw new Error(`model info failed: ${resp.status}`);
    return (await resp.json()) as ModelInfo;
  }

  async openSession(image: File | Blob): Promise<SessionInfo> {
    const form = new FormData();
    form.append("image", image, "upload.png");
    const resp = await fetch(`${this.base}/api/session`, { method: "POST", body: form });
    if (!resp.ok) throw new Error(`upload failed: ${resp.status}`);
    return (await resp.json()) as SessionInfo;
  }

  async restore(sessionId: string, level: number): Promise<Blob> {
    const params = new URLSearchParams({ session: sessionId, level: String(level) });
    const resp = await fetch(`${this.base}/api/restore?${params}`);
    if (!resp.ok) throw new Error(`restore failed: ${resp.status}`);
    return await resp.blob();
  }
}
