/**
 * Render numbers the way CPython's repr() renders floats and other scalars.
 *
 * The recommender derives pipeline embedding text from parameter values, so
 * this formatting must agree byte-for-byte: shortest round-trip digits, fixed
 * notation for decimal exponents in [-4, 15], scientific otherwise with a
 * signed, zero-padded (>= 2 digit) exponent, and a trailing ".0" on integral
 * fixed-notation values.
 */

export function pythonFloatRepr(x: number): string {
  if (Number.isNaN(x)) return "nan";
  if (!Number.isFinite(x)) return x > 0 ? "inf" : "-inf";
  if (x === 0) return Object.is(x, -0) ? "-0.0" : "0.0";

  const negative = x < 0;
  const magnitude = Math.abs(x);
  // toExponential() without an argument emits the shortest uniquely
  // round-tripping mantissa, e.g. "1.5e+16", "3.25e-8", "1e-5".
  const sci = magnitude.toExponential();
  const [mantissa, expText] = sci.split("e");
  const exponent = parseInt(expText, 10);
  const digits = mantissa.replace(".", "");

  let body: string;
  if (exponent < -4 || exponent >= 16) {
    const expAbs = Math.abs(exponent).toString().padStart(2, "0");
    body = `${mantissa}e${exponent < 0 ? "-" : "+"}${expAbs}`;
  } else if (exponent >= digits.length - 1) {
    body = digits + "0".repeat(exponent - (digits.length - 1)) + ".0";
  } else if (exponent >= 0) {
    body = `${digits.slice(0, exponent + 1)}.${digits.slice(exponent + 1)}`;
  } else {
    body = `0.${"0".repeat(-exponent - 1)}${digits}`;
  }
  return negative ? `-${body}` : body;
}

export function pythonScalarRepr(value: unknown, paramType: string): string {
  if (paramType === "real") return pythonFloatRepr(value as number);
  if (paramType === "int") return String(value);
  if (paramType === "bool") return value ? "True" : "False";
  if (paramType === "str") {
    const s = String(value).replace(/\\/g, "\\\\").replace(/'/g, "\\'");
    return `'${s}'`;
  }
  throw new Error(`unknown parameter type ${paramType}`);
}
