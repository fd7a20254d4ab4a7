#!/usr/bin/env node
// ml-eval --table <csv> --target <col> --task <t> --metric <m> --seed <n>
// Prints the cross-validated EvalResult as JSON on stdout.

import { readFileSync } from "fs";
import { Task } from "./data";
import { Metric } from "./metrics";
import { evaluateTable } from "./evaluate";

interface Args {
  table: string;
  target: string;
  task: Task;
  metric: Metric;
  seed: number;
}

function parseArgs(argv: string[]): Args {
  const values = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key?.startsWith("--") || value === undefined) {
      throw new Error(`malformed arguments near '${key ?? ""}'`);
    }
    values.set(key.slice(2), value);
  }
  const required = (name: string): string => {
    const v = values.get(name);
    if (v === undefined) throw new Error(`missing --${name}`);
    return v;
  };
  const task = required("task");
  if (task !== "classification" && task !== "regression") {
    throw new Error(`unknown task '${task}'`);
  }
  const metric = values.get("metric") ?? (task === "classification" ? "accuracy" : "mae");
  if (!["accuracy", "f1", "mae", "rmse"].includes(metric)) {
    throw new Error(`unknown metric '${metric}'`);
  }
  const seed = Number(values.get("seed") ?? "0");
  if (!Number.isInteger(seed)) throw new Error("seed must be an integer");
  return {
    table: required("table"),
    target: required("target"),
    task,
    metric: metric as Metric,
    seed,
  };
}

function main(): number {
  try {
    const args = parseArgs(process.argv.slice(2));
    const csvText = readFileSync(args.table, "utf-8");
    const result = evaluateTable(csvText, args.target, args.task, args.metric, args.seed);
    process.stdout.write(JSON.stringify(result) + "\n");
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${err instanceof Error ? err.message : err}\n`);
    return 1;
  }
}

process.exit(main());
