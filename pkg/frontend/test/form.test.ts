import { describe, expect, it } from 'vitest';

import { buildGold, emptyForm, parseDecision, textToGold } from '../src/form.js';
import { FakeGateway } from './fake_gateway.js';

function seededItem() {
  const gw = new FakeGateway();
  return gw.seed(1)[0].item;
}

describe('resolution form', () => {
  it('rejects submission with no gold mode selected', () => {
    const result = buildGold({ ...emptyForm(), expertId: 'e' }, seededItem());
    expect(result.ok).toBe(false);
    if (!result.ok) expect(result.errors).toContain('select exactly one gold mode');
  });

  it('requires an expert id', () => {
    const result = buildGold(
      { ...emptyForm(), mode: 'candidate', candidateIndex: 0 },
      seededItem(),
    );
    expect(result.ok).toBe(false);
    if (!result.ok) expect(result.errors).toContain('expert id is required');
  });

  it('builds a text gold from a picked candidate', () => {
    const result = buildGold(
      { ...emptyForm(), mode: 'candidate', candidateIndex: 0, expertId: 'e' },
      seededItem(),
    );
    expect(result).toEqual({ ok: true, gold: { type: 'exact_text', text: 'compliant' } });
  });

  it('rejects an out-of-range candidate index', () => {
    const result = buildGold(
      { ...emptyForm(), mode: 'candidate', candidateIndex: 7, expertId: 'e' },
      seededItem(),
    );
    expect(result.ok).toBe(false);
  });

  it('builds a numeric gold from a free-form percentage', () => {
    const result = buildGold(
      { ...emptyForm(), mode: 'free_form', freeText: '12.7%', expertId: 'e' },
      seededItem(),
    );
    expect(result).toEqual({ ok: true, gold: { type: 'numeric', value: 12.7 } });
  });

  it('builds a rubric gold', () => {
    const result = buildGold(
      { ...emptyForm(), mode: 'rubric', rubricText: 'must cover outlook', expertId: 'e' },
      seededItem(),
    );
    expect(result).toEqual({ ok: true, gold: { type: 'rubric', criteria: 'must cover outlook' } });
  });

  it('requires content for the selected mode', () => {
    const result = buildGold(
      { ...emptyForm(), mode: 'free_form', freeText: '  ', expertId: 'e' },
      seededItem(),
    );
    expect(result.ok).toBe(false);
  });
});

describe('decision parsing', () => {
  it('parses plain and formatted numbers', () => {
    expect(parseDecision('60')).toBe(60);
    expect(parseDecision('21,193,050.28')).toBeCloseTo(21193050.28);
    expect(parseDecision('12.7%')).toBeCloseTo(12.7);
    expect(parseDecision('−2.7%')).toBeCloseTo(-2.7);
  });

  it('returns null for non-numeric text', () => {
    expect(parseDecision('b')).toBeNull();
    expect(parseDecision('')).toBeNull();
    expect(parseDecision('12.7.8')).toBeNull();
  });

  it('case-folds text golds', () => {
    expect(textToGold('B')).toEqual({ type: 'exact_text', text: 'b' });
  });
});
