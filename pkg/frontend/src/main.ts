/** DOM glue: render the controller view into #app and forward events. */

import { GatewayClient } from './api.js';
import { ConsoleController, ConsoleView } from './controller.js';
import { renderBanner, renderDashboard, renderItemDetail, renderQueue } from './render.js';

const REFRESH_MS = 3000;

function baseUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get('gateway') ?? '';
}

function renderAll(view: ConsoleView): string {
  const detail = view.selected
    ? renderItemDetail(view.selected, view.selectedTask, view.form, view.formErrors)
    : '<section class="detail"><p>Select an item from the queue.</p></section>';
  return `
${renderBanner(view.banner)}
<div class="columns">
  <div class="col">${renderQueue(view.items, view.filter, view.selected?.id ?? null)}</div>
  <div class="col">${detail}</div>
  <div class="col">${renderDashboard(view.stats, view.statsStale)}</div>
</div>`;
}

function main(): void {
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app');
  const client = new GatewayClient(baseUrl());
  const controller = new ConsoleController(client, (view) => {
    root.innerHTML = renderAll(view);
  });

  root.addEventListener('click', (event) => {
    const target = (event.target as HTMLElement).closest('[data-action]') as HTMLElement | null;
    if (!target) return;
    const action = target.dataset.action;
    if (action === 'filter') {
      void controller.setFilter(target.dataset.filter as 'pending' | 'resolved');
    } else if (action === 'select') {
      void controller.select(target.dataset.item ?? '');
    } else if (action === 'mode') {
      controller.setMode((target as HTMLInputElement).value as never);
    } else if (action === 'pick-candidate') {
      controller.pickCandidate(Number(target.dataset.index));
    }
  });

  root.addEventListener('input', (event) => {
    const target = event.target as HTMLElement;
    const field = target.dataset.field;
    if (field === 'free-text') controller.setField('freeText', (target as HTMLInputElement).value);
    if (field === 'rubric-text') controller.setField('rubricText', (target as HTMLTextAreaElement).value);
    if (field === 'expert-id') controller.setField('expertId', (target as HTMLInputElement).value);
  });

  root.addEventListener('submit', (event) => {
    event.preventDefault();
    void controller.submit();
  });

  void controller.refresh();
  setInterval(() => void controller.refresh(), REFRESH_MS);
}

main();
