/* tslint:disable */
/* eslint-disable */

/**
 * A solved trajectory.
 */
export class Curve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly converged: boolean;
    readonly cost: number;
    readonly message: string;
    /**
     * `[t, q1, q2, ...]` for every node.
     */
    readonly points: Float64Array;
}

/**
 * Geodesic of a built-in system between two points.
 */
export function geodesic(system_name: string, q0: Float64Array, qf: Float64Array): Curve;

/**
 * Unit-ball boundaries of the metric, cometric or induced metric on an
 * `nx × ny` grid over the system's sample box. Grid points outside the
 * chart are skipped.
 */
export function indicatrix_grid(system_name: string, which: string, nx: number, ny: number, count: number): Float64Array;

/**
 * Riemannian cubic for the same boundary data (`sphere_dual`).
 */
export function riemannian_spline(q0: Float64Array, v0: Float64Array, qf: Float64Array, vf: Float64Array): Curve;

/**
 * `[lo1, hi1, lo2, hi2]` of a system's sample box.
 */
export function sample_box(system_name: string): Float64Array;

/**
 * Minimum-torque spline on `sphere_torque` (identity cometric) between two
 * `(λ, φ)` states, over a unit horizon.
 */
export function torque_spline(q0: Float64Array, v0: Float64Array, qf: Float64Array, vf: Float64Array): Curve;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_curve_free: (a: number, b: number) => void;
    readonly curve_converged: (a: number) => number;
    readonly curve_cost: (a: number) => number;
    readonly curve_message: (a: number) => [number, number];
    readonly curve_points: (a: number) => [number, number];
    readonly geodesic: (a: number, b: number, c: number, d: number, e: number, f: number) => number;
    readonly indicatrix_grid: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly riemannian_spline: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => number;
    readonly sample_box: (a: number, b: number) => [number, number, number, number];
    readonly torque_spline: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
