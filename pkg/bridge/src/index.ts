export type {
  BatchArrays,
  EvalResult,
  LossValues,
  PolygonArea,
  Ring,
} from "./codec.js";
export {
  MAGIC,
  MIN_HORIZON,
  VERSION,
  decodeRequest,
  decodeResponse,
  encodeRequest,
  validateBatch,
} from "./codec.js";
export {
  EnvironmentError,
  ProtocolError,
  ShapeError,
  ValidationError,
} from "./errors.js";
export type { SelfcheckCheck, SelfcheckReport } from "./selfcheck.js";
export { bridgeSelfcheck } from "./selfcheck.js";
export type { DacMode, LossConfig, SessionStats } from "./session.js";
export {
  BridgeSession,
  CORE_BINARY,
  CORE_ENV_VAR,
  bridgeEval,
  locateCore,
} from "./session.js";
