// Pure view logic: ordering, paging, formatting. Kept DOM-free so it can be
// tested directly.

import type { QueueItem } from "./types.js";

export const PAGE_SIZE = 20;

export function sortQueue(items: QueueItem[]): QueueItem[] {
  // most confident flags first; stable on item id for equal beliefs
  return [...items].sort((a, b) => {
    const fa = a.fused?.bel_f ?? 0;
    const fb = b.fused?.bel_f ?? 0;
    if (fb !== fa) return fb - fa;
    return a.item_id < b.item_id ? -1 : a.item_id > b.item_id ? 1 : 0;
  });
}

export interface Page<T> {
  items: T[];
  page: number;
  pageCount: number;
  total: number;
}

export function paginate<T>(items: T[], page: number, size: number = PAGE_SIZE): Page<T> {
  const pageCount = Math.max(1, Math.ceil(items.length / size));
  const clamped = Math.min(Math.max(page, 0), pageCount - 1);
  return {
    items: items.slice(clamped * size, (clamped + 1) * size),
    page: clamped,
    pageCount,
    total: items.length,
  };
}

export function formatBelief(value: number | null | undefined): string {
  if (value === null || value === undefined || Number.isNaN(value)) return "-";
  return value.toFixed(4);
}

export function formatAge(createdAt: number, now: number): string {
  const seconds = Math.max(0, Math.floor(now - createdAt));
  if (seconds < 60) return `${seconds}s`;
  if (seconds < 3600) return `${Math.floor(seconds / 60)}m`;
  if (seconds < 86400) return `${Math.floor(seconds / 3600)}h`;
  return `${Math.floor(seconds / 86400)}d`;
}

export const STATUS_LABELS: Record<string, string> = {
  pending: "pending",
  confirmed_misbehaving: "confirmed",
  overridden_normal: "overridden",
};

export function statusLabel(status: string): string {
  return STATUS_LABELS[status] ?? status;
}

// Exponential backoff for queue polling: base 5s doubling to a 80s cap,
// reset on success.
export function nextPollDelay(failures: number, baseMs = 5000, capMs = 80000): number {
  return Math.min(baseMs * 2 ** Math.min(failures, 10), capMs);
}
