/**
 * Pure HTML renderers. Every figure shown comes straight off a gateway
 * response field; there is no client-side aggregation that could drift.
 */

import type { AdjudicationItem, FunnelStats, TaskView } from './types.js';
import type { ResolutionFormState } from './form.js';

export function escapeHtml(text: string): string {
  return String(text)
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

export function renderBanner(banner: { kind: string; message: string } | null): string {
  if (!banner) return '';
  return `<div class="banner banner-${escapeHtml(banner.kind)}" data-testid="banner">${escapeHtml(
    banner.message,
  )}</div>`;
}

export function renderDashboard(stats: FunnelStats | null, stale: boolean): string {
  if (!stats) {
    return '<section class="dashboard" data-testid="dashboard"><p>no data yet</p></section>';
  }
  const levels = ['unverified', 'L1', 'L2', 'L3']
    .map(
      (level) =>
        `<div class="stat"><span class="stat-label">${level}</span>` +
        `<span class="stat-value" data-stat="level-${level}">${stats.verification_levels[level] ?? 0}</span></div>`,
    )
    .join('');
  const strata = ['core', 'learning', 'frontier']
    .map(
      (s) =>
        `<div class="stat"><span class="stat-label">${s}</span>` +
        `<span class="stat-value" data-stat="stratum-${s}">${stats.stratum_distribution[s] ?? 0}</span></div>`,
    )
    .join('');
  const staleNote = stale ? '<span class="stale" data-testid="stale">stale data</span>' : '';
  return `<section class="dashboard" data-testid="dashboard">
  <h2>Funnel ${staleNote}</h2>
  <div class="stat-row">${levels}</div>
  <div class="stat"><span class="stat-label">pending adjudications</span>
    <span class="stat-value" data-stat="pending">${stats.pending_adjudications}</span></div>
  <h2>Curriculum</h2>
  <div class="stat-row">${strata}</div>
  <div class="stat"><span class="stat-label">mastery pool</span>
    <span class="stat-value" data-stat="mastery">${stats.mastery_pool_size}</span></div>
</section>`;
}

export function renderQueue(
  items: AdjudicationItem[],
  filter: 'pending' | 'resolved',
  selectedId: string | null,
): string {
  const tabs = (['pending', 'resolved'] as const)
    .map(
      (f) =>
        `<button data-action="filter" data-filter="${f}" class="${f === filter ? 'active' : ''}">${f}</button>`,
    )
    .join('');
  if (items.length === 0) {
    return `<section class="queue"><div class="tabs">${tabs}</div>
<p class="empty" data-testid="empty-queue">No ${filter} items.</p></section>`;
  }
  const rows = items
    .map((item) => {
      const selected = item.id === selectedId ? ' selected' : '';
      return `<tr class="queue-row${selected}" data-action="select" data-item="${escapeHtml(item.id)}">
  <td class="mono">${escapeHtml(item.id)}</td>
  <td class="mono">${escapeHtml(item.task_id)}</td>
  <td>${item.candidate_answers.length}</td>
  <td>${escapeHtml(item.status)}</td>
</tr>`;
    })
    .join('\n');
  return `<section class="queue"><div class="tabs">${tabs}</div>
<table data-testid="queue-table">
<thead><tr><th>item</th><th>task</th><th>candidates</th><th>status</th></tr></thead>
<tbody>${rows}</tbody>
</table></section>`;
}

export function renderItemDetail(
  item: AdjudicationItem,
  task: TaskView | null,
  form: ResolutionFormState,
  errors: string[],
): string {
  const candidates = item.candidate_answers
    .map(
      (c, i) => `<label class="candidate">
  <input type="radio" name="candidate" data-action="pick-candidate" data-index="${i}"
    ${form.mode === 'candidate' && form.candidateIndex === i ? 'checked' : ''} />
  <span class="mono">${escapeHtml(c.source_model)}</span>: ${escapeHtml(c.answer)}
</label>`,
    )
    .join('\n');
  const prompt = task
    ? `<pre class="prompt" data-testid="prompt">${escapeHtml(task.prompt)}</pre>` +
      (task.context_docs.length
        ? `<details><summary>context (${task.context_docs.length})</summary><pre>${escapeHtml(
            task.context_docs.join('\n---\n'),
          )}</pre></details>`
        : '')
    : '<p>loading task…</p>';
  const errorHtml = errors.length
    ? `<ul class="form-errors" data-testid="form-errors">${errors
        .map((e) => `<li>${escapeHtml(e)}</li>`)
        .join('')}</ul>`
    : '';
  if (item.status === 'resolved') {
    return `<section class="detail" data-testid="detail">
  <h2>Item ${escapeHtml(item.id)} (resolved)</h2>
  ${prompt}
  <p data-testid="resolved-note">Resolved by ${escapeHtml(item.resolution?.expert_id ?? 'unknown')}.</p>
</section>`;
  }
  return `<section class="detail" data-testid="detail">
  <h2>Item ${escapeHtml(item.id)}</h2>
  ${prompt}
  <h3>Disagreement</h3>
  <pre class="mono small">${escapeHtml(item.disagreement_summary)}</pre>
  <h3>Decision</h3>
  <form data-action="resolution-form">
    <fieldset>
      <legend><label><input type="radio" name="mode" value="candidate" data-action="mode"
        ${form.mode === 'candidate' ? 'checked' : ''}/> pick a candidate</label></legend>
      ${candidates}
    </fieldset>
    <fieldset>
      <legend><label><input type="radio" name="mode" value="free_form" data-action="mode"
        ${form.mode === 'free_form' ? 'checked' : ''}/> free-form gold value</label></legend>
      <input type="text" data-field="free-text" value="${escapeHtml(form.freeText)}" placeholder="e.g. 12.7% or b" />
    </fieldset>
    <fieldset>
      <legend><label><input type="radio" name="mode" value="rubric" data-action="mode"
        ${form.mode === 'rubric' ? 'checked' : ''}/> rubric</label></legend>
      <textarea data-field="rubric-text" placeholder="grading criteria">${escapeHtml(form.rubricText)}</textarea>
    </fieldset>
    <label>expert id <input type="text" data-field="expert-id" value="${escapeHtml(form.expertId)}" /></label>
    ${errorHtml}
    <button type="submit" data-action="submit">Resolve</button>
  </form>
</section>`;
}
