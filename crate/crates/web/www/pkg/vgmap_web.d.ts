/* tslint:disable */
/* eslint-disable */

export class Registration {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Graph error after every LM iteration, starting with the initial error.
     */
    errors: Float64Array;
    final_overlap: number;
    initial_overlap: number;
    iterations: number;
    rotation_error_deg: number;
    /**
     * Interleaved `x, y` of the source points at the estimate.
     */
    source_xy: Float32Array;
    translation_error: number;
}

/**
 * Two consecutive synthetic submaps: the first is the voxelized target, the
 * second the source placed by a user-controlled guess.
 */
export class Scene {
    free(): void;
    [Symbol.dispose](): void;
    constructor(seed: number, resolution: number);
    /**
     * Fraction of source points inside populated target voxels at the guess.
     */
    overlap(dx: number, dy: number, yaw_deg: number): number;
    register(dx: number, dy: number, yaw_deg: number): Registration;
    resolution(): number;
    /**
     * Interleaved `x, y` of the source points placed by the guess.
     */
    source_xy(dx: number, dy: number, yaw_deg: number): Float32Array;
    /**
     * Interleaved `x, y` of the target points.
     */
    target_xy(): Float32Array;
    voxels(): number;
}

/**
 * Kernel weight at `samples + 1` evenly spaced residual norms in `[0, x_max]`.
 */
export function tukey_weights(width: number, offset: number, x_max: number, samples: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_get_registration_errors: (a: number) => [number, number];
    readonly __wbg_get_registration_final_overlap: (a: number) => number;
    readonly __wbg_get_registration_initial_overlap: (a: number) => number;
    readonly __wbg_get_registration_iterations: (a: number) => number;
    readonly __wbg_get_registration_rotation_error_deg: (a: number) => number;
    readonly __wbg_get_registration_source_xy: (a: number) => [number, number];
    readonly __wbg_get_registration_translation_error: (a: number) => number;
    readonly __wbg_registration_free: (a: number, b: number) => void;
    readonly __wbg_scene_free: (a: number, b: number) => void;
    readonly __wbg_set_registration_errors: (a: number, b: number, c: number) => void;
    readonly __wbg_set_registration_final_overlap: (a: number, b: number) => void;
    readonly __wbg_set_registration_initial_overlap: (a: number, b: number) => void;
    readonly __wbg_set_registration_iterations: (a: number, b: number) => void;
    readonly __wbg_set_registration_rotation_error_deg: (a: number, b: number) => void;
    readonly __wbg_set_registration_source_xy: (a: number, b: number, c: number) => void;
    readonly __wbg_set_registration_translation_error: (a: number, b: number) => void;
    readonly scene_new: (a: number, b: number) => [number, number, number];
    readonly scene_overlap: (a: number, b: number, c: number, d: number) => number;
    readonly scene_register: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly scene_resolution: (a: number) => number;
    readonly scene_source_xy: (a: number, b: number, c: number, d: number) => [number, number];
    readonly scene_target_xy: (a: number) => [number, number];
    readonly scene_voxels: (a: number) => number;
    readonly tukey_weights: (a: number, b: number, c: number, d: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
