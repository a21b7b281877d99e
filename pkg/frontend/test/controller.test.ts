import { describe, expect, it } from 'vitest';

import { GatewayClient } from '../src/api.js';
import { ConsoleController } from '../src/controller.js';
import { FakeGateway } from './fake_gateway.js';

function setup(seed = 2) {
  const gw = new FakeGateway();
  const seeded = gw.seed(seed);
  const controller = new ConsoleController(new GatewayClient('', gw.fetch));
  return { gw, seeded, controller };
}

describe('ConsoleController', () => {
  it('lists pending items oldest-first after refresh', async () => {
    const { controller } = setup(3);
    await controller.refresh();
    const view = controller.snapshot();
    expect(view.items.map((i) => i.id)).toEqual(['adj-0', 'adj-1', 'adj-2']);
    expect(view.stats?.pending_adjudications).toBe(3);
  });

  it('resolution round-trip: item leaves pending, L3 counter increments', async () => {
    const { controller } = setup(2);
    await controller.refresh();
    const before = controller.snapshot().stats!;
    expect(before.verification_levels['L3']).toBe(0);

    await controller.select('adj-0');
    expect(controller.snapshot().selectedTask?.prompt).toContain('practice 0');
    controller.pickCandidate(0);
    controller.setField('expertId', 'expert-42');
    await controller.submit();

    const view = controller.snapshot();
    expect(view.banner?.kind).toBe('success');
    // One refresh already happened inside submit: the counter moved.
    expect(view.stats!.verification_levels['L3']).toBe(before.verification_levels['L3'] + 1);
    expect(view.stats!.pending_adjudications).toBe(before.pending_adjudications - 1);
    expect(view.items.map((i) => i.id)).toEqual(['adj-1']);
  });

  it('invalid form never sends a request', async () => {
    const { gw, controller } = setup(1);
    await controller.refresh();
    await controller.select('adj-0');
    const writesBefore = gw.requests.filter((r) => r.method === 'POST').length;
    await controller.submit(); // nothing selected in the form
    expect(controller.snapshot().formErrors.length).toBeGreaterThan(0);
    const writesAfter = gw.requests.filter((r) => r.method === 'POST').length;
    expect(writesAfter).toBe(writesBefore);
  });

  it('double-submit surfaces the conflict without overwriting', async () => {
    const { gw, seeded, controller } = setup(1);
    await controller.refresh();
    await controller.select('adj-0');

    // Another expert resolves the same item first.
    const rival = new GatewayClient('', gw.fetch);
    const rivalOutcome = await rival.resolve(
      seeded[0].item.id,
      { type: 'exact_text', text: 'non-compliant' },
      'rival',
    );
    expect(rivalOutcome.ok).toBe(true);

    controller.pickCandidate(0);
    controller.setField('expertId', 'late-expert');
    await controller.submit();

    const view = controller.snapshot();
    expect(view.banner?.kind).toBe('conflict');
    expect(gw.items.get('adj-0')!.resolution?.expert_id).toBe('rival'); // untouched
  });

  it('filter=resolved shows only resolved items', async () => {
    const { gw, controller } = setup(2);
    await controller.refresh();
    await controller.select('adj-1');
    controller.pickCandidate(1);
    controller.setField('expertId', 'e');
    await controller.submit();

    await controller.setFilter('resolved');
    const view = controller.snapshot();
    expect(view.items.map((i) => i.id)).toEqual(['adj-1']);
    // Mirrors the server listing exactly.
    const direct = await new GatewayClient('', gw.fetch).listAdjudication('resolved');
    expect(view.items).toEqual(direct);
  });

  it('unreachable service shows a banner and marks data stale', async () => {
    const { gw, controller } = setup(1);
    await controller.refresh();
    gw.offline = true;
    await controller.refresh();
    const view = controller.snapshot();
    expect(view.banner?.kind).toBe('error');
    expect(view.statsStale).toBe(true);
    // Last known data is retained, not cleared.
    expect(view.items).toHaveLength(1);
  });
});
