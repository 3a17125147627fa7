/* tslint:disable */
/* eslint-disable */

/**
 * Statistic path `Z(1..=length)`; samples come from `pre` before `change_point` and `post` from it on.
 */
export function simulate_path(q_inf: Float64Array, q_post: Float64Array, pre: Float64Array, post: Float64Array, change_point: number, length: number, rho: number, seed: number): Float64Array;

/**
 * ARL/EDD sweep flattened as `[omega, arl, arl_stderr, edd, edd_stderr]` per threshold.
 */
export function sweep(q_inf: Float64Array, q_post: Float64Array, p_inf: Float64Array, p_post: Float64Array, rho: number, omegas: Float64Array, paths: number, cap: number, seed: number): Float64Array;

/**
 * Instantaneous score on an `n × n` grid over `[-extent, extent]²`, row-major with `y` increasing.
 */
export function z_field(q_inf: Float64Array, q_post: Float64Array, rho: number, extent: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly simulate_path: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number, k: number, l: number) => [number, number, number, number];
    readonly sweep: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number, k: number, l: number, m: number, n: number) => [number, number, number, number];
    readonly z_field: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
