export { als, bpr, mcmc, sgd } from "./estimators.js";
export type { FMConfig, FitOptions } from "./estimators.js";
export { csrMatrix, fromDense, toDense, nnz, validateCsr } from "./csr.js";
export type { CsrMatrix } from "./csr.js";
export { parseLibsvm, writeLibsvm } from "./libsvm.js";
export type { LabeledData } from "./libsvm.js";
export { parseModelFile } from "./model.js";
export type { ModelParams } from "./model.js";
export { FastFMServer, getServer, shutdownServer } from "./client.js";
export { encodeF64, encodeI64, decodeF64, decodeI64 } from "./codec.js";
export { DataError, FastFMError, NotFittedError, ServerError } from "./errors.js";
