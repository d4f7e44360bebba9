import Papa from "papaparse";

export interface Table {
  columns: string[];
  rows: Record<string, number>[];
}

/** Parse a fully numeric CSV with a header row. Every cell must be finite. */
export function parseNumericCsv(text: string): Table {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new Error(`CSV parse error: ${e.message} (row ${e.row ?? "?"})`);
  }
  const columns = parsed.meta.fields ?? [];
  if (columns.length === 0) {
    throw new Error("CSV has no header row");
  }
  const rows = parsed.data.map((raw, i) => {
    const row: Record<string, number> = {};
    for (const c of columns) {
      const v = Number(raw[c]);
      if (!Number.isFinite(v)) {
        throw new Error(
          `non-numeric value ${JSON.stringify(raw[c] ?? "")} in column "${c}", data row ${i + 1}`,
        );
      }
      row[c] = v;
    }
    return row;
  });
  if (rows.length === 0) {
    throw new Error("CSV has a header but no data rows");
  }
  return { columns, rows };
}

export function column(table: Table, name: string): number[] {
  if (!table.columns.includes(name)) {
    throw new Error(`missing column "${name}"; file has: ${table.columns.join(", ")}`);
  }
  return table.rows.map((r) => r[name]);
}
