"""Regenerate the bundled JSONL assets under src/finforge/assets/."""

import json
from pathlib import Path

ASSETS = Path(__file__).resolve().parents[1] / "src" / "finforge" / "assets"
ASSETS.mkdir(parents=True, exist_ok=True)


def dump(name, rows):
    path = ASSETS / name
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    print(f"wrote {path} ({len(rows)} records)")


def var(symbol, unit, lo, hi, sign="any"):
    return {"symbol": symbol, "unit": unit, "range": [lo, hi], "sign": sign}


axioms = [
    {
        "id": "acct_identity",
        "name": "Balance-sheet identity: assets equal liabilities plus equity",
        "domain_tag": "accounting",
        "variables": [
            var("assets", "currency", 1000, 1000000, "positive"),
            var("liabilities", "currency", 0, 500000, "nonneg"),
            var("equity", "currency", 1000, 500000, "positive"),
        ],
        "relation": "(= assets (+ liabilities equity))",
    },
    {
        "id": "capm_required_return",
        "name": "CAPM required return: risk-free rate plus beta times the market premium",
        "domain_tag": "securities",
        "variables": [
            var("expected_return", "percent", -20, 40),
            var("risk_free", "percent", 1, 8, "positive"),
            var("market_return", "percent", 5, 20, "positive"),
            var("beta", "ratio", 0.5, 2.5, "positive"),
        ],
        "relation": "(= expected_return (+ risk_free (* beta (- market_return risk_free))))",
    },
    {
        "id": "capm_alpha",
        "name": "Alpha: observed return minus the CAPM-required return",
        "domain_tag": "securities",
        "variables": [
            var("alpha", "percent", -40, 40),
            var("observed_return", "percent", 0, 40, "nonneg"),
            var("required_return", "percent", 0, 40, "nonneg"),
        ],
        "relation": "(= alpha (- observed_return required_return))",
    },
    {
        "id": "roe_pct",
        "name": "Return on equity as a percentage of shareholder equity",
        "domain_tag": "accounting",
        "variables": [
            var("roe", "percent", 0, 800, "positive"),
            var("net_income", "currency", 500, 80000, "positive"),
            var("equity", "currency", 10000, 200000, "positive"),
        ],
        "relation": "(= roe (/ (* net_income 100) equity))",
    },
    {
        "id": "gross_profit",
        "name": "Gross profit: revenue less cost of goods sold",
        "domain_tag": "accounting",
        "variables": [
            var("gross_profit", "currency", -790000, 899000),
            var("revenue", "currency", 10000, 900000, "positive"),
            var("cogs", "currency", 1000, 800000, "positive"),
        ],
        "relation": "(= gross_profit (- revenue cogs))",
    },
    {
        "id": "current_ratio",
        "name": "Current ratio: current assets over current liabilities",
        "domain_tag": "banking",
        "variables": [
            var("current_ratio", "ratio", 0.001, 900, "positive"),
            var("current_assets", "currency", 1000, 900000, "positive"),
            var("current_liabilities", "currency", 1000, 900000, "positive"),
        ],
        "relation": "(= current_ratio (/ current_assets current_liabilities))",
    },
    {
        "id": "simple_interest",
        "name": "Simple interest earned over whole years",
        "domain_tag": "banking",
        "variables": [
            var("interest", "currency", 0, 600000, "nonneg"),
            var("principal", "currency", 1000, 500000, "positive"),
            var("rate", "percent", 0.5, 12, "positive"),
            var("years", "count", 1, 10, "positive"),
        ],
        "relation": "(= interest (* principal (/ rate 100) years))",
    },
    {
        "id": "net_margin",
        "name": "Net margin: net income as a percentage of revenue",
        "domain_tag": "accounting",
        "variables": [
            var("net_margin", "percent", -500, 800),
            var("net_income", "currency", -50000, 80000),
            var("revenue", "currency", 10000, 900000, "positive"),
        ],
        "relation": "(= net_margin (/ (* net_income 100) revenue))",
    },
    {
        "id": "debt_to_equity",
        "name": "Debt-to-equity ratio",
        "domain_tag": "banking",
        "variables": [
            var("debt_to_equity", "ratio", 0, 500, "nonneg"),
            var("total_debt", "currency", 0, 500000, "nonneg"),
            var("equity", "currency", 1000, 200000, "positive"),
        ],
        "relation": "(= debt_to_equity (/ total_debt equity))",
    },
    {
        "id": "eps",
        "name": "Earnings per share",
        "domain_tag": "securities",
        "variables": [
            var("eps", "currency", -900, 900),
            var("net_income", "currency", -500000, 900000),
            var("shares", "count", 1000, 1000000, "positive"),
        ],
        "relation": "(= eps (/ net_income shares))",
    },
    {
        "id": "dividend_yield",
        "name": "Dividend yield as a percentage of the share price",
        "domain_tag": "securities",
        "variables": [
            var("dividend_yield", "percent", 0, 1000, "nonneg"),
            var("dividend_per_share", "currency", 0.01, 10, "positive"),
            var("price", "currency", 1, 500, "positive"),
        ],
        "relation": "(= dividend_yield (/ (* dividend_per_share 100) price))",
    },
    {
        "id": "working_capital",
        "name": "Working capital: current assets less current liabilities",
        "domain_tag": "accounting",
        "variables": [
            var("working_capital", "currency", -899000, 899000),
            var("current_assets", "currency", 1000, 900000, "positive"),
            var("current_liabilities", "currency", 1000, 900000, "positive"),
        ],
        "relation": "(= working_capital (- current_assets current_liabilities))",
    },
]

points = [
    # banking
    ("kp-bank-01", "banking", "Commercial banks must hold a fraction of deposits as reserves; the required reserve ratio is set by the central bank and limits how much of each deposit can be lent out."),
    ("kp-bank-02", "banking", "A bank's capital adequacy ratio compares its regulatory capital with its risk-weighted assets; falling below the regulatory floor triggers supervisory intervention."),
    ("kp-bank-03", "banking", "The loan-to-deposit ratio measures how much of a bank's deposit base is committed to lending; a very high ratio signals tighter liquidity."),
    ("kp-bank-04", "banking", "Know-your-customer rules require banks to verify client identity and the source of funds before opening accounts or processing large transfers."),
    # securities
    ("kp-sec-01", "securities", "A security's beta measures the sensitivity of its return to the overall market return; a beta above one amplifies market moves."),
    ("kp-sec-02", "securities", "Insider dealing rules prohibit trading on material non-public information and apply to anyone who receives such information, not only company officers."),
    ("kp-sec-03", "securities", "A bond trading below face value is priced at a discount; its yield to maturity is then higher than its coupon rate."),
    ("kp-sec-04", "securities", "Margin requirements cap the share of a position that can be financed with borrowed funds; a margin call demands additional collateral when equity falls below the maintenance level."),
    # insurance
    ("kp-ins-01", "insurance", "An insurance policy's deductible is the amount the policyholder bears before the insurer pays; higher deductibles generally lower the premium."),
    ("kp-ins-02", "insurance", "Underwriting assesses the risk of an applicant and sets the premium; adverse selection arises when high-risk applicants are more likely to seek cover."),
    ("kp-ins-03", "insurance", "Reinsurance transfers part of an insurer's risk to another carrier, protecting the ceding insurer against catastrophic accumulations of claims."),
    ("kp-ins-04", "insurance", "The combined ratio adds the loss ratio and the expense ratio; a combined ratio above one hundred percent means underwriting operations lost money."),
    # accounting
    ("kp-acct-01", "accounting", "Under accrual accounting, revenue is recognized when it is earned, not when cash is received, and expenses are matched to the periods they help generate revenue."),
    ("kp-acct-02", "accounting", "Depreciation allocates the cost of a tangible asset over its useful life; straight-line depreciation charges an equal amount each period."),
    ("kp-acct-03", "accounting", "Non-recurring items such as asset disposals and one-off subsidies are reported separately so that users can judge the quality of recurring earnings."),
    ("kp-acct-04", "accounting", "Goodwill arises when the purchase price of an acquisition exceeds the fair value of identifiable net assets, and it must be tested for impairment rather than amortized."),
    # macroeconomics
    ("kp-macro-01", "macroeconomics", "Raising the policy interest rate tends to cool credit growth and inflation while strengthening the currency, with a lag of several quarters."),
    ("kp-macro-02", "macroeconomics", "The consumer price index tracks the cost of a fixed basket of goods and services; core inflation excludes volatile food and energy prices."),
    ("kp-macro-03", "macroeconomics", "An inverted yield curve, with short-term rates above long-term rates, has historically preceded economic slowdowns."),
    ("kp-macro-04", "macroeconomics", "A current-account deficit means a country imports more goods, services, and income than it exports, and must finance the gap with capital inflows."),
]

templates = [
    {
        "id": "tmpl-compliance-01",
        "task_type": "compliance",
        "tags": ["regulatory"],
        "question": "Decide whether the described practice complies with each rule above. Answer 'compliant' or 'non-compliant' for the practice overall, then justify each judgement by citing the rule it rests on.",
        "body": "You are reviewing a financial institution's conduct.\nRelevant rules and facts:\n- {{point_1}}\n- {{point_2}}\n- {{point_3}}\n- {{point_4}}\n- {{point_5}}\n\nTask: {{question}}",
    },
    {
        "id": "tmpl-commenting-01",
        "task_type": "commenting",
        "tags": ["report_commentary"],
        "question": "Write a short professional commentary that ties these facts together, covering profitability and future outlook.",
        "body": "Background for your commentary:\n- {{point_1}}\n- {{point_2}}\n- {{point_3}}\n- {{point_4}}\n- {{point_5}}\n\nTask: {{question}}",
    },
    {
        "id": "tmpl-intent-01",
        "task_type": "intent",
        "tags": ["intent_recognition"],
        "question": "Classify the intent of a customer who asks about each of the facts above, choosing from: account service, investment advice, risk disclosure, or complaint.",
        "body": "Reference knowledge:\n- {{point_1}}\n- {{point_2}}\n- {{point_3}}\n- {{point_4}}\n- {{point_5}}\n\nTask: {{question}}",
    },
    {
        "id": "tmpl-halluc-01",
        "task_type": "hallucination_detection",
        "tags": ["fact_check"],
        "question": "A draft report will follow. Flag every statement that is not supported by the reference facts above and explain why it is unsupported.",
        "body": "Reference facts:\n- {{point_1}}\n- {{point_2}}\n- {{point_3}}\n- {{point_4}}\n- {{point_5}}\n\nTask: {{question}}",
    },
    {
        "id": "tmpl-table-01",
        "task_type": "table_reasoning",
        "tags": ["tabular"],
        "question": "Treat each fact above as a row of a reference table. Answer: which row constrains short-term liquidity most directly, and why?",
        "body": "Table rows:\n- {{point_1}}\n- {{point_2}}\n- {{point_3}}\n- {{point_4}}\n- {{point_5}}\n\nTask: {{question}}",
    },
]

format_rules = [
    {
        "id": "yoy-pct",
        "description": "Year-over-year changes must use 'pct', not '%'.",
        "severity": "error",
        "detector": {
            "kind": "regex",
            "pattern": "(?i)\\byoy\\b[^.\\n%]{0,60}(?P<v1>%)|(?P<v2>%)[^.\\n%]{0,40}\\byoy\\b",
            "sites": "(?i)\\byoy\\b[^.\\n%]{0,60}(?:%|\\bpct\\b)|(?:%|\\bpct\\b)[^.\\n%]{0,40}\\byoy\\b",
        },
    },
    {
        "id": "strict-json",
        "description": "Output must be a single JSON value with no surrounding prose.",
        "severity": "error",
        "applies_tags": ["strict_json"],
        "detector": {"kind": "json_only"},
    },
    {
        "id": "list-separator",
        "description": "House list-separator convention. No canonical default is shipped; set 'pattern' to the separator usage you want flagged.",
        "severity": "warn",
        "detector": {"kind": "regex", "pattern": "(?!x)x"},
    },
]

fact_sets = [
    {"fact_set_id": "cf_q1_2023", "metric": "non_recurring_total", "value": "21193050.28", "unit": "currency:CNY", "period": "Q1-2023"},
    {"fact_set_id": "cf_q1_2023", "metric": "net_profit_attributable", "value": "181662559.98", "unit": "currency:CNY", "period": "Q1-2023"},
    {"fact_set_id": "cf_q1_2023", "metric": "non_recurring_ratio", "value": "11.67", "unit": "percent", "period": "Q1-2023"},
    {"fact_set_id": "cf_q1_2023", "metric": "deducted_profit_growth_yoy", "value": "92.68", "unit": "percent", "period": "Q1-2023"},
    {"fact_set_id": "cf_q1_2023", "metric": "net_profit_growth_yoy", "value": "56.89", "unit": "percent", "period": "Q1-2023"},
]

scenarios = [
    {
        "id": "sav_balance",
        "user_goal": "What is the current balance of my savings account?",
        "visible_facts": {"branch": "Harbor Street"},
        "hidden_facts": {"account_id": "SAV-2291"},
        "aliases": {"account_id": ["account number", "account id", "which account"]},
        "tools": [
            {
                "name": "lookup_balance",
                "params": [{"name": "account_id", "type": "string", "required": True}],
                "behavior": {
                    "kind": "table",
                    "key": ["account_id"],
                    "rows": {"SAV-2291": {"balance": 2500.75, "currency": "CNY"}},
                    "default": {"found": False},
                },
                "strict_params": True,
            }
        ],
        "gold": {
            "payload": {"type": "numeric", "value": 2500.75, "tolerance_abs": 0.01, "tolerance_rel": 0.0},
            "method": "code_exec",
            "confidence": "deterministic",
        },
        "optimal_steps": 3,
        "requires_tool": True,
    },
    {
        "id": "fx_convert",
        "user_goal": "Convert 150 USD into CNY at the quoted rate.",
        "visible_facts": {"amount_usd": "150", "usd_cny_rate": "7.2"},
        "hidden_facts": {},
        "tools": [
            {
                "name": "multiply",
                "params": [
                    {"name": "a", "type": "number", "required": True},
                    {"name": "b", "type": "number", "required": True},
                ],
                "behavior": {"kind": "expr", "expr": "(* a b)"},
                "strict_params": True,
            }
        ],
        "gold": {
            "payload": {"type": "numeric", "value": 1080.0, "tolerance_abs": 0.01, "tolerance_rel": 0.0},
            "method": "code_exec",
            "confidence": "deterministic",
        },
        "optimal_steps": 2,
        "requires_tool": True,
    },
    {
        "id": "branch_hours",
        "user_goal": "What are the branch's weekday opening hours?",
        "visible_facts": {"weekday_hours": "09:00-17:00"},
        "hidden_facts": {},
        "tools": [],
        "gold": {
            "payload": {"type": "exact_text", "text": "09:00-17:00"},
            "method": "human",
            "confidence": "adjudicated",
        },
        "optimal_steps": 1,
        "requires_tool": False,
    },
]

dump("axioms.jsonl", axioms)
dump("knowledge_points.jsonl", [
    {"id": pid, "domain_tag": tag, "content": content, "source_ref": "bundled-mini-kb"}
    for pid, tag, content in points
])
dump("templates.jsonl", templates)
dump("format_rules.jsonl", format_rules)
dump("fact_sets.jsonl", fact_sets)
dump("scenarios.jsonl", scenarios)
