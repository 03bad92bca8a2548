#!/usr/bin/env python3
"""Writes the bundled micro-suite under data/microsuite.

Reference targets are computed here in plain Python, independently of the
C++ operators, so the suite can check them.
"""

import csv
import json
import sys
from collections import OrderedDict
from pathlib import Path


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def num(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def task(root, tid, sources, target_schema, expected_header, expected_rows):
    d = root / tid
    d.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in sources.items():
        write_csv(d / f"{name}.csv", header, rows)
    write_csv(d / "expected.csv", expected_header, [[num(v) for v in r] for r in expected_rows])
    manifest = OrderedDict()
    manifest["format_version"] = 1
    manifest["id"] = tid
    manifest["sources"] = [{"name": n, "path": f"{n}.csv"} for n in sources]
    manifest["target_schema"] = target_schema
    manifest["reference_target"] = "expected.csv"
    (d / "task.json").write_text(json.dumps(manifest, indent=2) + "\n")


def iso(y, m, d):
    return f"{y:04d}-{m:02d}-{d:02d}"


def group(rows, keys, value, fn):
    out = OrderedDict()
    for r in rows:
        out.setdefault(tuple(r[k] for k in keys), []).append(r[value])
    res = []
    for k, vals in out.items():
        if fn == "sum":
            agg = sum(vals)
        elif fn == "mean":
            agg = sum(vals) / len(vals)
        else:
            raise ValueError(fn)
        res.append(list(k) + [agg])
    return res


def main(root):
    root = Path(root)

    # Plain rename of one column.
    sales = [(iso(2024, 1, d), s, v) for d, s, v in
             [(1, 1, 120.5), (1, 2, 80.0), (2, 1, 99.25), (2, 2, 40.0), (3, 3, 12.0), (3, 1, 7.5)]]
    task(root, "rename_only", {"sales": (["Date", "Store_id", "Sales"], sales)},
         ["Date", "Shop_id", "Sales"], ["Date", "Shop_id", "Sales"], sales)

    employees = [(1, "Ada", "eng", "X1", "remote"), (2, "Brook", "ops", "X2", ""),
                 (3, "Cy", "eng", "X3", "part time"), (4, "Dee", "sales", "X4", "")]
    task(root, "drop_columns",
         {"employees": (["emp_id", "name", "dept", "internal_code", "notes"], employees)},
         ["emp_id", "name", "dept"], ["emp_id", "name", "dept"], [r[:3] for r in employees])

    prices = [("pen", 1.5), ("book", 12.0), ("lamp", 30.25)]
    task(root, "add_column", {"prices": (["item", "price"], prices)},
         ["item", "price", {"name": "currency", "description": "constant USD"}],
         ["item", "price", "currency"], [(i, p, "USD") for i, p in prices])

    q1 = [("north", "jan", 100), ("south", "jan", 80), ("north", "feb", 110)]
    q2 = [("south", "apr", 90), ("north", "may", 130), ("east", "jun", 70)]
    task(root, "union", {"sales_q1": (["region", "month", "revenue"], q1),
                         "sales_q2": (["region", "month", "revenue"], q2)},
         ["region", "month", "revenue"], ["region", "month", "revenue"], q1 + q2)

    orders = [(101, 1, 25.0), (102, 2, 40.5), (103, 1, 12.25), (104, 9, 5.0), (105, 3, 60.0)]
    customers = [(1, "Acme", "retail"), (2, "Birch", "wholesale"), (3, "Cobalt", "retail")]
    cust = {c[0]: c for c in customers}
    joined = [(o, cust[c][1], a) for o, c, a in orders if c in cust]
    task(root, "join", {"orders": (["order_id", "customer_id", "amount"], orders),
                        "customers": (["customer_id", "customer_name", "segment"], customers)},
         ["order_id", "customer_name", "amount"], ["order_id", "customer_name", "amount"], joined)

    tx = [("north", "pen", 10), ("south", "pen", 4), ("north", "ink", 6), ("east", "pad", 9),
          ("south", "ink", 1), ("north", "pad", 3)]
    tx_rows = [{"region": r, "amount": a} for r, _, a in tx]
    task(root, "groupby", {"transactions": (["region", "product", "amount"], tx)},
         ["region", "total_amount"], ["region", "total_amount"],
         group(tx_rows, ["region"], "amount", "sum"))

    readings = [(iso(2024, 3, 1), "temp", 21.5), (iso(2024, 3, 1), "humidity", 40.0),
                (iso(2024, 3, 2), "temp", 19.0), (iso(2024, 3, 2), "humidity", 55.5),
                (iso(2024, 3, 3), "temp", 23.25), (iso(2024, 3, 3), "humidity", 47.0)]
    wide = OrderedDict()
    for d, s, v in readings:
        wide.setdefault(d, {})[s] = v
    task(root, "pivot", {"readings": (["date", "sensor", "value"], readings)},
         ["date", "temp", "humidity"], ["date", "temp", "humidity"],
         [(d, v["temp"], v["humidity"]) for d, v in wide.items()])

    months = ["jan", "feb", "mar"]
    stores = [("s1", 10, 12, 9), ("s2", 7, 0, 15)]
    task(root, "unpivot", {"monthly": (["store"] + months, stores)},
         ["store", "month", "sales"], ["store", "month", "sales"],
         [(s[0], m, s[1 + i]) for s in stores for i, m in enumerate(months)])

    lines = [("pen", 1.5, 4), ("book", 12.25, 2), ("lamp", 30.0, 1)]
    task(root, "column_arithmetic", {"order_lines": (["product", "price", "quantity"], lines)},
         ["product", "price", "quantity", {"name": "revenue", "description": "price * quantity"}],
         ["product", "price", "quantity", "revenue"], [(p, pr, q, pr * q) for p, pr, q in lines])

    events = [("launch", 2024, 5, 3), ("review", 2024, 6, 17), ("retro", 2023, 12, 1)]
    task(root, "date_formatting",
         {"events": (["event", "event_date"], [(e, f"{y:04d}.{m:02d}.{d:02d}") for e, y, m, d in events])},
         ["event", "event_date"], ["event", "event_date"], [(e, iso(y, m, d)) for e, y, m, d in events])

    # Date normalisation, a renamed key and a summed measure in one task.
    raw = [((2024, 1, 5), 1, "toys", 10.0), ((2024, 1, 5), 1, "toys", 5.5), ((2024, 1, 5), 2, "food", 3.0),
           ((2024, 1, 6), 1, "food", 8.0), ((2024, 1, 6), 2, "food", 4.0), ((2024, 1, 6), 2, "food", 6.0),
           ((2024, 1, 5), 1, "food", 2.0)]

    def ex1_rows(fmt):
        return [(fmt(*d), s, c, v) for d, s, c, v in raw]

    norm = [{"Date": iso(*d), "Shop_id": s, "Product_category": c, "Sales": v} for d, s, c, v in raw]
    task(root, "store_sales_dotted",
         {"sales": (["Date", "Store_id", "Product_category", "Sales"],
                    ex1_rows(lambda y, m, d: f"{y:04d}.{m:02d}.{d:02d}"))},
         ["Date", "Shop_id", "Product_category", "Total_store_sales"],
         ["Date", "Shop_id", "Product_category", "Total_store_sales"],
         group(norm, ["Date", "Shop_id", "Product_category"], "Sales", "sum"))

    task(root, "store_sales_slashed",
         {"sales": (["Date", "Store_id", "Product_category", "Sales"],
                    ex1_rows(lambda y, m, d: f"{y:04d}/{m:02d}/{d:02d}"))},
         ["Date", "Shop_id", "Total_sales"], ["Date", "Shop_id", "Total_sales"],
         group(norm, ["Date", "Shop_id"], "Sales", "sum"))

    task(root, "category_mean_us_dates",
         {"sales": (["Date", "Store_id", "Product_category", "Sales"],
                    ex1_rows(lambda y, m, d: f"{m:02d}-{d:02d}-{y:04d}"))},
         ["Date", "Product_category", "Avg_sales"], ["Date", "Product_category", "Avg_sales"],
         group(norm, ["Date", "Product_category"], "Sales", "mean"))

    regions = [(1, "west"), (2, "east"), (3, "west")]
    orders2 = [(1, 1, 20), (2, 2, 35), (3, 3, 5), (4, 1, 10), (5, 2, 1)]
    reg = dict(regions)
    j_rows = [{"region": reg[c], "amount": a} for _, c, a in orders2]
    task(root, "join_groupby", {"orders": (["order_id", "customer_id", "amount"], orders2),
                                "customers": (["customer_id", "region"], regions)},
         ["region", "total_amount"], ["region", "total_amount"],
         group(j_rows, ["region"], "amount", "sum"))

    products = [("pen", 1.5, 2, "P-1"), ("desk", 120.0, 1, "D-7"), ("cup", 4.25, 4, "C-2")]
    task(root, "rename_arithmetic",
         {"products": (["prod_name", "unit_price", "qty", "internal_sku"], products)},
         ["product_name", "unit_price", "qty", {"name": "line_total", "description": "unit_price * qty"}],
         ["product_name", "unit_price", "qty", "line_total"],
         [(n, p, q, p * q) for n, p, q, _ in products])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "microsuite")
