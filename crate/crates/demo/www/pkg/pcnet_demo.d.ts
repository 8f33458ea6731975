/* tslint:disable */
/* eslint-disable */

/**
 * Weight and bias counts of a network and of its single-circuit twin.
 */
export class ConnectionSummary {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Fraction of single-circuit weights that remain.
     */
    ratio(): number;
    parallel_hidden: number;
    parallel_total: number;
    single_hidden: number;
    single_total: number;
}

/**
 * A PC network learning a 2-D toy problem one epoch at a time.
 */
export class DemoTrainer {
    free(): void;
    [Symbol.dispose](): void;
    epochs_done(): number;
    labels(): Uint8Array;
    /**
     * `dataset` is `spirals` or `blobs`; `width` is the total width of
     * each of the two hidden layers.
     */
    constructor(dataset: string, classes: number, circuits: number, width: number, policy: string, learning_rate: number, seed: number);
    /**
     * Training points as interleaved `x, y` pairs.
     */
    points(): Float64Array;
    /**
     * Trains `epochs` more epochs; returns the latest test error (%).
     */
    step(epochs: number): number;
    /**
     * Predicted class on a `resolution × resolution` grid covering
     * `[-extent, extent]²`, row by row from the top.
     */
    surface(resolution: number, extent: number): Uint8Array;
    test_errors(): Float64Array;
    train_errors(): Float64Array;
}

export function connection_counts(input: number, hidden: Uint32Array, output: number, circuits: number): ConnectionSummary;

/**
 * Circuit masks the trainer would use, laid out as
 * `[epoch][instance][circuit]` with 1 for a kept circuit.
 */
export function mask_pattern(policy: string, circuits: number, retain_p: number, instances: number, epochs: number, seed: number): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_connectionsummary_free: (a: number, b: number) => void;
    readonly __wbg_demotrainer_free: (a: number, b: number) => void;
    readonly __wbg_get_connectionsummary_parallel_hidden: (a: number) => number;
    readonly __wbg_get_connectionsummary_parallel_total: (a: number) => number;
    readonly __wbg_get_connectionsummary_single_hidden: (a: number) => number;
    readonly __wbg_get_connectionsummary_single_total: (a: number) => number;
    readonly __wbg_set_connectionsummary_parallel_hidden: (a: number, b: number) => void;
    readonly __wbg_set_connectionsummary_parallel_total: (a: number, b: number) => void;
    readonly __wbg_set_connectionsummary_single_hidden: (a: number, b: number) => void;
    readonly __wbg_set_connectionsummary_single_total: (a: number, b: number) => void;
    readonly connection_counts: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly connectionsummary_ratio: (a: number) => number;
    readonly demotrainer_epochs_done: (a: number) => number;
    readonly demotrainer_labels: (a: number) => [number, number];
    readonly demotrainer_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly demotrainer_points: (a: number) => [number, number];
    readonly demotrainer_step: (a: number, b: number) => [number, number, number];
    readonly demotrainer_surface: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demotrainer_test_errors: (a: number) => [number, number];
    readonly demotrainer_train_errors: (a: number) => [number, number];
    readonly mask_pattern: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
