/** Error taxonomy for the bridge. Matching the core's split: shape problems
 * are caught before anything is serialized, value problems before anything
 * is sent, protocol problems when bytes do not parse, and environment
 * problems when the core executable cannot be found at all. */

export class ShapeError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ShapeError";
  }
}

export class ValidationError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ValidationError";
  }
}

export class ProtocolError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ProtocolError";
  }
}

export class EnvironmentError extends Error {
  readonly searchedPaths: readonly string[];

  constructor(message: string, searchedPaths: readonly string[]) {
    super(`${message}; searched: ${searchedPaths.join(", ")}`);
    this.name = "EnvironmentError";
    this.searchedPaths = searchedPaths;
  }
}
