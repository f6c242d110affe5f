/* tslint:disable */
/* eslint-disable */

/**
 * Effective channel magnitude of device 0 behind `risses` RISs of `elements` elements under
 * each phase policy.
 */
export function compare_phases(risses: number, elements: number, seed: number, trial: number): string;

/**
 * `xy` and its two envelopes along `x ∈ [0, x_max]` at fixed `y`, anchored at `(x_a, y_a)`.
 */
export function envelope_slice(y: number, x_anchor: number, y_anchor: number, x_max: number, points: number): string;

/**
 * Power CDF and rates of one campaign on the default scenario.
 *
 * `mode` is one of `df-tdma`, `df-fdma`, `af-tdma`, `af-fdma`, `ris-tdma`, `single-hop`; for
 * `ris-tdma`, `helpers` counts RISs of `ris_elements` elements each.
 */
export function simulate(mode: string, helpers: number, ris_elements: number, pmax_dbm: number, payload_bytes: number, trials: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly compare_phases: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly envelope_slice: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly simulate: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
