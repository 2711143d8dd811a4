/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_curve_free: (a: number, b: number) => void;
export const curve_converged: (a: number) => number;
export const curve_cost: (a: number) => number;
export const curve_message: (a: number) => [number, number];
export const curve_points: (a: number) => [number, number];
export const geodesic: (a: number, b: number, c: number, d: number, e: number, f: number) => number;
export const indicatrix_grid: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const riemannian_spline: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => number;
export const sample_box: (a: number, b: number) => [number, number, number, number];
export const torque_spline: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
