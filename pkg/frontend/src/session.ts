// Session state: token, principal summary, expiry countdown. The token
// lives in sessionStorage only (cleared when the tab closes); an expired
// session routes back to login.

import type { PrincipalInfo } from "./api.js";

const STORAGE_KEY = "pmaas-session";

export interface SessionState {
  token: string;
  principal: PrincipalInfo;
  expiresAt: string;
}

interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class Session {
  private storage: StorageLike;

  constructor(storage?: StorageLike) {
    this.storage = storage ?? window.sessionStorage;
  }

  save(state: SessionState): void {
    this.storage.setItem(STORAGE_KEY, JSON.stringify(state));
  }

  load(): SessionState | null {
    const raw = this.storage.getItem(STORAGE_KEY);
    if (!raw) return null;
    try {
      return JSON.parse(raw) as SessionState;
    } catch {
      return null;
    }
  }

  clear(): void {
    this.storage.removeItem(STORAGE_KEY);
  }

  secondsLeft(state: SessionState, now: Date = new Date()): number {
    return Math.floor((Date.parse(state.expiresAt) - now.getTime()) / 1000);
  }

  isExpired(state: SessionState, now: Date = new Date()): boolean {
    return this.secondsLeft(state, now) <= 0;
  }

  canCreateProducts(state: SessionState): boolean {
    return state.principal.role === "producer" || state.principal.role === "provider_admin";
  }
}
