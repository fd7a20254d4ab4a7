// Minimal RFC-4180 CSV reader: quoted fields, escaped quotes, CRLF.

export interface RawTable {
  header: string[];
  rows: string[][];
}

const NULL_LITERALS = new Set(["", "NULL", "null", "NA"]);

export function parseCsv(text: string): RawTable {
  const rows: string[][] = [];
  let field = "";
  let row: string[] = [];
  let inQuotes = false;
  let i = 0;
  const pushField = () => {
    row.push(field);
    field = "";
  };
  const pushRow = () => {
    pushField();
    rows.push(row);
    row = [];
  };
  while (i < text.length) {
    const ch = text[i];
    if (inQuotes) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          field += '"';
          i += 2;
          continue;
        }
        inQuotes = false;
        i++;
        continue;
      }
      field += ch;
      i++;
      continue;
    }
    if (ch === '"') {
      inQuotes = true;
      i++;
    } else if (ch === ",") {
      pushField();
      i++;
    } else if (ch === "\r") {
      i++; // handled together with the following \n
    } else if (ch === "\n") {
      pushRow();
      i++;
    } else {
      field += ch;
      i++;
    }
  }
  if (field.length > 0 || row.length > 0) {
    pushRow();
  }
  if (rows.length === 0) {
    throw new Error("empty CSV");
  }
  const header = rows[0];
  const body = rows.slice(1);
  for (const r of body) {
    if (r.length !== header.length) {
      throw new Error(
        `ragged CSV row: expected ${header.length} fields, got ${r.length}`
      );
    }
  }
  return { header, rows: body };
}

export function isNullLiteral(cell: string): boolean {
  return NULL_LITERALS.has(cell);
}
