/**
 * Console state machine, DOM-free so it is testable headless.
 *
 * All reads go through the gateway client; the sole mutation is submitting a
 * resolution. A concurrent resolution surfaces as a conflict banner and the
 * queue is re-fetched rather than overwritten.
 */

import { GatewayClient, GatewayUnreachable } from './api.js';
import { buildGold, emptyForm, GoldMode, ResolutionFormState } from './form.js';
import type { AdjudicationItem, FunnelStats, TaskView } from './types.js';

export interface ConsoleView {
  filter: 'pending' | 'resolved';
  items: AdjudicationItem[];
  selected: AdjudicationItem | null;
  selectedTask: TaskView | null;
  form: ResolutionFormState;
  formErrors: string[];
  stats: FunnelStats | null;
  statsStale: boolean;
  banner: { kind: 'error' | 'conflict' | 'success'; message: string } | null;
}

export class ConsoleController {
  private view: ConsoleView = {
    filter: 'pending',
    items: [],
    selected: null,
    selectedTask: null,
    form: emptyForm(),
    formErrors: [],
    stats: null,
    statsStale: false,
    banner: null,
  };

  constructor(
    private readonly client: GatewayClient,
    private readonly onChange: (view: ConsoleView) => void = () => {},
  ) {}

  snapshot(): ConsoleView {
    return this.view;
  }

  private update(patch: Partial<ConsoleView>): void {
    this.view = { ...this.view, ...patch };
    this.onChange(this.view);
  }

  /** One refresh tick: queue listing plus dashboard stats. */
  async refresh(): Promise<void> {
    try {
      const [items, stats] = await Promise.all([
        this.client.listAdjudication(this.view.filter),
        this.client.getStats(),
      ]);
      const selected =
        this.view.selected === null
          ? null
          : items.find((i) => i.id === this.view.selected!.id) ?? this.view.selected;
      this.update({ items, stats, statsStale: false, selected, banner: this.view.banner });
    } catch (err) {
      if (err instanceof GatewayUnreachable) {
        // Keep showing the last data, marked stale; never queue writes.
        this.update({
          statsStale: true,
          banner: { kind: 'error', message: 'service unreachable' },
        });
        return;
      }
      throw err;
    }
  }

  async setFilter(filter: 'pending' | 'resolved'): Promise<void> {
    this.update({ filter, selected: null, selectedTask: null, form: emptyForm(), formErrors: [] });
    await this.refresh();
  }

  async select(itemId: string): Promise<void> {
    const item = this.view.items.find((i) => i.id === itemId) ?? null;
    this.update({ selected: item, selectedTask: null, form: emptyForm(), formErrors: [] });
    if (item) {
      try {
        const task = await this.client.getTask(item.task_id);
        this.update({ selectedTask: task });
      } catch {
        this.update({ selectedTask: null });
      }
    }
  }

  setMode(mode: GoldMode): void {
    this.update({ form: { ...this.view.form, mode }, formErrors: [] });
  }

  pickCandidate(index: number): void {
    this.update({
      form: { ...this.view.form, mode: 'candidate', candidateIndex: index },
      formErrors: [],
    });
  }

  setField(field: 'freeText' | 'rubricText' | 'expertId', value: string): void {
    this.update({ form: { ...this.view.form, [field]: value } });
  }

  /** Validate locally; only a valid form produces a network request. */
  async submit(): Promise<void> {
    const item = this.view.selected;
    if (!item) return;
    const result = buildGold(this.view.form, item);
    if (!result.ok) {
      this.update({ formErrors: result.errors });
      return;
    }
    const outcome = await this.client.resolve(item.id, result.gold, this.view.form.expertId.trim());
    if (outcome.ok) {
      this.update({
        banner: { kind: 'success', message: `resolved; task now at ${outcome.verificationLevel}` },
        selected: null,
        selectedTask: null,
        form: emptyForm(),
        formErrors: [],
      });
    } else {
      this.update({
        banner: {
          kind: 'conflict',
          message: `already resolved by another expert (${outcome.message}); nothing overwritten`,
        },
        selected: null,
        selectedTask: null,
        form: emptyForm(),
        formErrors: [],
      });
    }
    await this.refresh();
  }
}
