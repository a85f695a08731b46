/**
 * Parser and renderer for the Python literal subset the review service
 * understands: None, True/False, ints, finite floats, strings, lists and
 * tuples.  Corrections typed into the UI are validated and canonicalized
 * here with the same grammar the service applies, so a value that passes
 * locally is accepted by the service verbatim.
 */

export type PyValue =
  | { kind: "none" }
  | { kind: "bool"; value: boolean }
  | { kind: "int"; digits: string; negative: boolean }
  | { kind: "float"; value: number }
  | { kind: "str"; value: string }
  | { kind: "list"; items: PyValue[] }
  | { kind: "tuple"; items: PyValue[] };

export type Correction =
  | { kind: "value"; text: string }
  | { kind: "exception"; name: string; message: string };

export class LiteralError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "LiteralError";
  }
}

const NAMED_ESCAPES: Record<string, string> = {
  "\\": "\\",
  "'": "'",
  '"': '"',
  n: "\n",
  r: "\r",
  t: "\t",
  b: "\b",
  f: "\f",
  v: "\v",
  a: "\x07",
};

/** Renders exactly like the service: single quotes, a small escape set. */
const RENDER_ESCAPES: Record<string, string> = {
  "\\": "\\\\",
  "'": "\\'",
  "\n": "\\n",
  "\r": "\\r",
  "\t": "\\t",
};

class Parser {
  private pos = 0;

  constructor(private readonly text: string) {}

  parse(): PyValue {
    this.skipSpace();
    if (this.pos >= this.text.length) {
      this.fail("empty input");
    }
    const value = this.parseValue();
    this.skipSpace();
    if (this.pos < this.text.length) {
      this.fail("trailing characters after the value");
    }
    return value;
  }

  private fail(reason: string): never {
    throw new LiteralError(`not a literal: ${this.text} (${reason})`);
  }

  private peek(): string {
    return this.text[this.pos] ?? "";
  }

  private skipSpace(): void {
    while (this.pos < this.text.length && " \t\n\r".includes(this.peek())) {
      this.pos += 1;
    }
  }

  private parseValue(): PyValue {
    this.skipSpace();
    const c = this.peek();
    if (c === "") {
      this.fail("unexpected end of input");
    }
    if (c === "[") {
      return this.parseSequence("]", "list");
    }
    if (c === "(") {
      return this.parseSequence(")", "tuple");
    }
    if (c === "'" || c === '"') {
      return { kind: "str", value: this.parseString(c) };
    }
    if (c === "+" || c === "-") {
      this.pos += 1;
      this.skipSpace();
      const next = this.peek();
      if (!/[0-9.]/.test(next)) {
        this.fail("a sign must be followed by a number");
      }
      return this.parseNumber(c === "-");
    }
    if (/[0-9.]/.test(c)) {
      return this.parseNumber(false);
    }
    if (/[A-Za-z_]/.test(c)) {
      return this.parseName();
    }
    this.fail(`unexpected character ${JSON.stringify(c)}`);
  }

  private parseName(): PyValue {
    const match = /^[A-Za-z_][A-Za-z0-9_]*/.exec(this.text.slice(this.pos));
    const name = match ? match[0] : "";
    this.pos += name.length;
    if (name === "None") {
      return { kind: "none" };
    }
    if (name === "True" || name === "False") {
      return { kind: "bool", value: name === "True" };
    }
    this.fail(`unknown name '${name}'`);
  }

  private parseSequence(close: "]" | ")", kind: "list" | "tuple"): PyValue {
    this.pos += 1; // opening bracket
    this.skipSpace();
    const items: PyValue[] = [];
    let sawComma = false;
    if (this.peek() === close) {
      this.pos += 1;
    } else {
      for (;;) {
        items.push(this.parseValue());
        this.skipSpace();
        const c = this.peek();
        if (c === ",") {
          sawComma = true;
          this.pos += 1;
          this.skipSpace();
          if (this.peek() === close) {
            this.pos += 1;
            break;
          }
          continue;
        }
        if (c === close) {
          this.pos += 1;
          break;
        }
        this.fail(`expected ',' or '${close}'`);
      }
    }
    if (kind === "tuple" && items.length === 1 && !sawComma) {
      // Parentheses around a single value group it; only a comma makes a tuple.
      return items[0]!;
    }
    if (kind === "list") {
      return { kind: "list", items };
    }
    return { kind: "tuple", items };
  }

  private parseString(quote: string): string {
    this.pos += 1; // opening quote
    let out = "";
    for (;;) {
      const c = this.text[this.pos];
      if (c === undefined || c === "\n" || c === "\r") {
        this.fail("unterminated string");
      }
      if (c === quote) {
        this.pos += 1;
        return out;
      }
      if (c !== "\\") {
        out += c;
        this.pos += 1;
        continue;
      }
      const e = this.text[this.pos + 1];
      if (e === undefined) {
        this.fail("unterminated string");
      }
      if (e === "\n") {
        this.pos += 2; // a backslash-newline continues the line
        continue;
      }
      const named = NAMED_ESCAPES[e];
      if (named !== undefined) {
        out += named;
        this.pos += 2;
        continue;
      }
      if (e === "x" || e === "u" || e === "U") {
        const width = e === "x" ? 2 : e === "u" ? 4 : 8;
        const hex = this.text.slice(this.pos + 2, this.pos + 2 + width);
        if (hex.length < width || !/^[0-9a-fA-F]+$/.test(hex)) {
          this.fail(`truncated \\${e} escape`);
        }
        const code = parseInt(hex, 16);
        if (code > 0x10ffff) {
          this.fail(`\\${e} escape out of range`);
        }
        out += String.fromCodePoint(code);
        this.pos += 2 + width;
        continue;
      }
      if (/[0-7]/.test(e)) {
        const octal = /^[0-7]{1,3}/.exec(this.text.slice(this.pos + 1))![0];
        out += String.fromCharCode(parseInt(octal, 8));
        this.pos += 1 + octal.length;
        continue;
      }
      // Python keeps unrecognized escapes verbatim.
      out += "\\" + e;
      this.pos += 2;
    }
  }

  private parseNumber(negative: boolean): PyValue {
    const rest = this.text.slice(this.pos);
    const prefixed = /^0([xX](_?[0-9a-fA-F])+|[oO](_?[0-7])+|[bB](_?[01])+)/.exec(rest);
    if (prefixed) {
      this.pos += prefixed[0].length;
      const digits = BigInt(prefixed[0].replace(/_/g, "")).toString();
      return this.makeInt(digits, negative);
    }
    const match =
      /^(?:[0-9](?:_?[0-9])*)?(?:\.(?:[0-9](?:_?[0-9])*)?)?(?:[eE][+-]?[0-9](?:_?[0-9])*)?/.exec(
        rest,
      );
    const token = match ? match[0] : "";
    if (token === "" || token === ".") {
      this.fail("malformed number");
    }
    this.pos += token.length;
    const cleaned = token.replace(/_/g, "");
    const isFloat = cleaned.includes(".") || /[eE]/.test(cleaned);
    if (!isFloat) {
      if (cleaned.length > 1 && cleaned.startsWith("0") && /[1-9]/.test(cleaned)) {
        this.fail("integers may not have leading zeros");
      }
      return this.makeInt(BigInt(cleaned).toString(), negative);
    }
    const value = Number(cleaned);
    if (!Number.isFinite(value)) {
      this.fail("float is out of range");
    }
    return { kind: "float", value: negative ? -value : value };
  }

  private makeInt(digits: string, negative: boolean): PyValue {
    return { kind: "int", digits, negative: negative && digits !== "0" };
  }
}

export function parseLiteral(text: string): PyValue {
  return new Parser(text.trim()).parse();
}

function renderString(value: string): string {
  let out = "'";
  for (const ch of value) {
    const mapped = RENDER_ESCAPES[ch];
    if (mapped !== undefined) {
      out += mapped;
      continue;
    }
    const code = ch.codePointAt(0)!;
    if (code < 0x20 || code === 0x7f) {
      out += `\\x${code.toString(16).padStart(2, "0")}`;
      continue;
    }
    out += ch;
  }
  return out + "'";
}

/** Matches Python's float repr: shortest digits, scientific past 1e16. */
function renderFloat(value: number): string {
  if (value === 0) {
    return Object.is(value, -0) ? "-0.0" : "0.0";
  }
  const negative = value < 0;
  const parts = /^([0-9])(?:\.([0-9]+))?e([+-][0-9]+)$/.exec(
    Math.abs(value).toExponential(),
  )!;
  const digits = parts[1]! + (parts[2] ?? "");
  const exponent = parseInt(parts[3]!, 10);
  let body: string;
  if (exponent >= 16 || exponent < -4) {
    const mantissa =
      digits.length === 1 ? digits : `${digits[0]}.${digits.slice(1)}`;
    const magnitude = Math.abs(exponent).toString().padStart(2, "0");
    body = `${mantissa}e${exponent < 0 ? "-" : "+"}${magnitude}`;
  } else if (exponent >= 0) {
    const intPart = digits.slice(0, exponent + 1).padEnd(exponent + 1, "0");
    const fraction = digits.slice(exponent + 1);
    body = fraction ? `${intPart}.${fraction}` : `${intPart}.0`;
  } else {
    body = `0.${"0".repeat(-exponent - 1)}${digits}`;
  }
  return negative ? `-${body}` : body;
}

export function renderValue(value: PyValue): string {
  switch (value.kind) {
    case "none":
      return "None";
    case "bool":
      return value.value ? "True" : "False";
    case "int":
      return (value.negative ? "-" : "") + value.digits;
    case "float":
      return renderFloat(value.value);
    case "str":
      return renderString(value.value);
    case "list":
      return `[${value.items.map(renderValue).join(", ")}]`;
    case "tuple":
      if (value.items.length === 1) {
        return `(${renderValue(value.items[0]!)},)`;
      }
      return `(${value.items.map(renderValue).join(", ")})`;
  }
}

/** Parses and re-renders, yielding the service's canonical spelling. */
export function canonicalText(text: string): string {
  return renderValue(parseLiteral(text));
}

const EXCEPTION_FORM = /^([A-Za-z_][A-Za-z0-9_]*)(?::\s*([\s\S]*))?$/;

/**
 * Interprets a correction box: first as a literal value, then as an
 * exception of the form "Name" or "Name: message".
 */
export function parseCorrection(text: string): Correction {
  const trimmed = text.trim();
  if (trimmed === "") {
    throw new LiteralError("a correction cannot be empty");
  }
  let literalError: LiteralError;
  try {
    return { kind: "value", text: canonicalText(trimmed) };
  } catch (error) {
    if (!(error instanceof LiteralError)) {
      throw error;
    }
    literalError = error;
  }
  const match = EXCEPTION_FORM.exec(trimmed);
  if (match) {
    return { kind: "exception", name: match[1]!, message: (match[2] ?? "").trim() };
  }
  throw literalError;
}

/**
 * Returns a human-readable reason the text is not a usable correction, or
 * null when it parses cleanly.
 */
export function correctionProblem(text: string): string | null {
  try {
    parseCorrection(text);
    return null;
  } catch (error) {
    if (error instanceof LiteralError) {
      return error.message;
    }
    throw error;
  }
}
