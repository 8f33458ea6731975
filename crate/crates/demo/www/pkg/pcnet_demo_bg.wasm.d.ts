/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_connectionsummary_free: (a: number, b: number) => void;
export const __wbg_demotrainer_free: (a: number, b: number) => void;
export const __wbg_get_connectionsummary_parallel_hidden: (a: number) => number;
export const __wbg_get_connectionsummary_parallel_total: (a: number) => number;
export const __wbg_get_connectionsummary_single_hidden: (a: number) => number;
export const __wbg_get_connectionsummary_single_total: (a: number) => number;
export const __wbg_set_connectionsummary_parallel_hidden: (a: number, b: number) => void;
export const __wbg_set_connectionsummary_parallel_total: (a: number, b: number) => void;
export const __wbg_set_connectionsummary_single_hidden: (a: number, b: number) => void;
export const __wbg_set_connectionsummary_single_total: (a: number, b: number) => void;
export const connection_counts: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const connectionsummary_ratio: (a: number) => number;
export const demotrainer_epochs_done: (a: number) => number;
export const demotrainer_labels: (a: number) => [number, number];
export const demotrainer_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
export const demotrainer_points: (a: number) => [number, number];
export const demotrainer_step: (a: number, b: number) => [number, number, number];
export const demotrainer_surface: (a: number, b: number, c: number) => [number, number, number, number];
export const demotrainer_test_errors: (a: number) => [number, number];
export const demotrainer_train_errors: (a: number) => [number, number];
export const mask_pattern: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
