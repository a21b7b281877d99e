/**
 * In-memory stand-in for the gateway, mirroring the endpoint semantics the
 * console depends on: oldest-first pending listing, one successful resolve
 * per item with 409 + already_resolved after, and stats counters that move
 * when a task reaches L3.
 */

import type { FetchLike } from '../src/api.js';
import type { AdjudicationItem, FunnelStats, TaskView } from '../src/types.js';

export interface SeededItem {
  item: AdjudicationItem;
  task: TaskView;
}

export class FakeGateway {
  items = new Map<string, AdjudicationItem>();
  tasks = new Map<string, TaskView>();
  requests: { method: string; url: string }[] = [];
  offline = false;

  seed(n: number): SeededItem[] {
    const out: SeededItem[] = [];
    for (let i = 0; i < n; i++) {
      const taskId = `task-${i}`;
      const task: TaskView = {
        id: taskId,
        task_type: 'compliance',
        prompt: `Decide whether practice ${i} is compliant.`,
        context_docs: ['reserve requirements apply'],
        domain_tag: 'banking',
        verification_level: 'unverified',
      };
      const item: AdjudicationItem = {
        id: `adj-${i}`,
        task_id: taskId,
        candidate_answers: [
          { source_model: 'model-a', answer: 'compliant' },
          { source_model: 'model-b', answer: 'non-compliant' },
        ],
        disagreement_summary: '{"reason":"below_agree_fraction"}',
        status: 'pending',
        resolution: null,
        created_at: 1000 + i,
      };
      this.items.set(item.id, item);
      this.tasks.set(taskId, task);
      out.push({ item, task });
    }
    return out;
  }

  stats(): FunnelStats {
    const levels: Record<string, number> = { unverified: 0, L1: 0, L2: 0, L3: 0 };
    for (const task of this.tasks.values()) {
      levels[task.verification_level] = (levels[task.verification_level] ?? 0) + 1;
    }
    return {
      tasks: this.tasks.size,
      verification_levels: levels,
      pending_adjudications: [...this.items.values()].filter((i) => i.status === 'pending').length,
      stratum_distribution: { core: 0, learning: 0, frontier: 0 },
      mastery_pool_size: 0,
      store_counts: {},
    };
  }

  fetch: FetchLike = async (url, init) => {
    this.requests.push({ method: init?.method ?? 'GET', url });
    if (this.offline) {
      throw new TypeError('fetch failed');
    }
    const u = new URL(url, 'http://gateway.test');
    const path = decodeURIComponent(u.pathname);

    if (path === '/v1/stats') {
      return json(200, this.stats());
    }
    if (path === '/v1/adjudication') {
      const status = u.searchParams.get('status');
      let items = [...this.items.values()];
      if (status) items = items.filter((i) => i.status === status);
      items.sort((a, b) => a.created_at - b.created_at || a.id.localeCompare(b.id));
      return json(200, { items });
    }
    const taskMatch = path.match(/^\/v1\/tasks\/(.+)$/);
    if (taskMatch) {
      const task = this.tasks.get(taskMatch[1]);
      return task
        ? json(200, task)
        : json(404, { code: 'unknown_id', message: 'no task', detail: null });
    }
    const resolveMatch = path.match(/^\/v1\/adjudication\/(.+):resolve$/);
    if (resolveMatch && init?.method === 'POST') {
      const item = this.items.get(resolveMatch[1]);
      if (!item) return json(404, { code: 'unknown_id', message: 'no item', detail: null });
      if (item.status === 'resolved') {
        return json(409, { code: 'already_resolved', message: 'already resolved', detail: null });
      }
      const body = JSON.parse(String(init.body)) as { gold: unknown; expert_id: string };
      item.status = 'resolved';
      item.resolution = { gold: body.gold, expert_id: body.expert_id };
      const task = this.tasks.get(item.task_id)!;
      task.verification_level = 'L3';
      return json(200, { task, item });
    }
    return json(404, { code: 'unknown_id', message: `no route ${path}`, detail: null });
  };
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}
