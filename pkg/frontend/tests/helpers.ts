import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const HERE = dirname(fileURLToPath(import.meta.url));

/** Load a JSON fixture from tests/fixtures/. */
export function fixture<T>(name: string): T {
  const path = join(HERE, "fixtures", `${name}.json`);
  return JSON.parse(readFileSync(path, "utf8")) as T;
}

export function deepClone<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}

/** Parse the repr-style float strings used in the codec fixture. */
export function parseReprFloat(text: string): number {
  if (text === "inf") return Infinity;
  if (text === "-inf") return -Infinity;
  return Number(text);
}
