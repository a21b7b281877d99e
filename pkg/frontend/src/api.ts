/**
 * Gateway client. Reads use GET; the one and only write the console ever
 * performs is the documented resolve endpoint. A 409 from a concurrent
 * resolution is reported as a conflict, never retried or overwritten.
 */

import type { AdjudicationItem, ErrorBody, FunnelStats, GoldPayload, TaskView } from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GatewayUnreachable extends Error {
  constructor(cause: unknown) {
    super(`gateway unreachable: ${String(cause)}`);
  }
}

export class GatewayError extends Error {
  constructor(public readonly body: ErrorBody, public readonly status: number) {
    super(body.message);
  }
}

export type ResolveOutcome =
  | { ok: true; verificationLevel: string }
  | { ok: false; conflict: true; message: string };

export class GatewayClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new GatewayUnreachable(err);
    }
    const body = (await response.json().catch(() => null)) as unknown;
    if (!response.ok) {
      const error = (body ?? { code: 'unknown', message: `HTTP ${response.status}`, detail: null }) as ErrorBody;
      throw new GatewayError(error, response.status);
    }
    return body;
  }

  async listAdjudication(status?: 'pending' | 'resolved'): Promise<AdjudicationItem[]> {
    const query = status ? `?status=${status}` : '';
    const body = (await this.request(`/v1/adjudication${query}`)) as { items: AdjudicationItem[] };
    return body.items;
  }

  async getTask(taskId: string): Promise<TaskView> {
    return (await this.request(`/v1/tasks/${encodeURIComponent(taskId)}`)) as TaskView;
  }

  async getStats(): Promise<FunnelStats> {
    return (await this.request('/v1/stats')) as FunnelStats;
  }

  async resolve(itemId: string, gold: GoldPayload, expertId: string): Promise<ResolveOutcome> {
    try {
      const body = (await this.request(`/v1/adjudication/${encodeURIComponent(itemId)}:resolve`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ gold, expert_id: expertId }),
      })) as { task: { verification_level: string } };
      return { ok: true, verificationLevel: body.task.verification_level };
    } catch (err) {
      if (err instanceof GatewayError && err.status === 409) {
        return { ok: false, conflict: true, message: err.body.message };
      }
      throw err;
    }
  }
}
