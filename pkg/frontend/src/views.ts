// HTML renderers. Pure string builders so the view layer is testable
// without a DOM; app.ts owns insertion and event wiring.

import { formatAge, formatBelief, statusLabel, type Page } from "./model.js";
import type { ItemDetail, QueueItem } from "./types.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderBanner(message: string): string {
  return `<div class="banner error">
    <span>${esc(message)}</span>
    <button data-action="retry">retry</button>
  </div>`;
}

export function renderQueue(page: Page<QueueItem>, now: number): string {
  if (page.total === 0) {
    return `<p class="empty">No pending items.</p>`;
  }
  const rows = page.items
    .map(
      (item) => `<tr data-item="${esc(item.item_id)}">
      <td class="mono">${esc(item.item_id)}</td>
      <td>${esc(item.user_id)}</td>
      <td class="num">${formatBelief(item.fused?.bel_f)}</td>
      <td class="num">${formatBelief(item.fused?.bel_n)}</td>
      <td class="num">${formatBelief(item.skin_probability)}</td>
      <td>${formatAge(item.created_at, now)}</td>
      <td><span class="badge ${esc(item.status)}">${esc(statusLabel(item.status))}</span></td>
    </tr>`,
    )
    .join("\n");
  const pager =
    page.pageCount > 1
      ? `<div class="pager">
      <button data-action="prev" ${page.page === 0 ? "disabled" : ""}>prev</button>
      <span>page ${page.page + 1} of ${page.pageCount}</span>
      <button data-action="next" ${page.page + 1 >= page.pageCount ? "disabled" : ""}>next</button>
    </div>`
      : "";
  return `<table class="queue">
    <thead><tr>
      <th>item</th><th>user</th><th>bel_f</th><th>bel_n</th>
      <th>p_f</th><th>age</th><th>status</th>
    </tr></thead>
    <tbody>${rows}</tbody>
  </table>${pager}`;
}

export function renderDetail(item: ItemDetail, overlayUrls: string[],
                             frameUrls: string[]): string {
  const verdict = item.verdict;
  const framesHtml = frameUrls
    .map(
      (url, k) => `<figure>
      <img src="${esc(url)}" alt="frame ${k + 1}">
      <img src="${esc(overlayUrls[k] ?? "")}" alt="overlay ${k + 1}">
      <figcaption>frame ${k + 1}:
        bel_n ${formatBelief(verdict.per_frame_beliefs[k]?.bel_n)},
        bel_f ${formatBelief(verdict.per_frame_beliefs[k]?.bel_f)}
      </figcaption>
    </figure>`,
    )
    .join("\n");

  const detectors = verdict.evidence_log
    .map((frameLog, k) => {
      const cells = Object.entries(frameLog)
        .map(
          ([kind, entry]) =>
            `<span class="det ${entry.present ? "on" : "off"}">${esc(kind)}</span>`,
        )
        .join(" ");
      return `<div class="detrow"><span>frame ${k + 1}</span> ${cells}</div>`;
    })
    .join("\n");

  const sp = verdict.sp
    ? verdict.sp.map((v) => formatBelief(v)).join(", ")
    : "-";
  const pending = item.status === "pending";
  return `<section class="detail" data-item="${esc(item.item_id)}">
    <header>
      <h2>${esc(item.user_id)} <span class="badge ${esc(item.status)}">${esc(
        statusLabel(item.status),
      )}</span></h2>
      <button data-action="back">back to queue</button>
    </header>
    <div class="frames">${framesHtml}</div>
    <dl class="stats">
      <dt>fused bel_n</dt><dd>${formatBelief(verdict.fused?.bel_n)}</dd>
      <dt>fused bel_f</dt><dd>${formatBelief(verdict.fused?.bel_f)}</dd>
      <dt>skin proportions</dt><dd>${sp}</dd>
      <dt>skin component</dt><dd>${formatBelief(verdict.skc)}</dd>
      <dt>skin probability</dt><dd>${formatBelief(verdict.skin_probability)}</dd>
    </dl>
    <div class="detectors">${detectors}</div>
    <div class="actions">
      <button data-action="confirm" ${pending ? "" : "disabled"}>confirm misbehaving</button>
      <button data-action="override" ${pending ? "" : "disabled"}>override as normal</button>
    </div>
  </section>`;
}
