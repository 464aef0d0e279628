/** Base class for every error raised by this binding. */
export class FastFMError extends Error {
  override name = "FastFMError";
}

/** Estimator attribute or prediction requested before a successful fit. */
export class NotFittedError extends FastFMError {
  override name = "NotFittedError";
}

/** Structurally invalid input (shapes, index ranges, label sets). */
export class DataError extends FastFMError {
  override name = "DataError";
}

/** The core reported a failure; `kind` carries the server-side type. */
export class ServerError extends FastFMError {
  override name = "ServerError";

  constructor(
    message: string,
    public readonly kind: string,
  ) {
    super(message);
  }
}

/** Map a protocol error object onto the matching binding error. */
export function errorFromResponse(err: { type?: string; message?: string }): FastFMError {
  const message = err.message ?? "unknown server error";
  switch (err.type) {
    case "NotFittedError":
      return new NotFittedError(message);
    case "DataError":
      return new DataError(message);
    default:
      return new ServerError(message, err.type ?? "unknown");
  }
}
