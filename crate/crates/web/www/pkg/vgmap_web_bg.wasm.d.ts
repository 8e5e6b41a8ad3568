/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_get_registration_errors: (a: number) => [number, number];
export const __wbg_get_registration_final_overlap: (a: number) => number;
export const __wbg_get_registration_initial_overlap: (a: number) => number;
export const __wbg_get_registration_iterations: (a: number) => number;
export const __wbg_get_registration_rotation_error_deg: (a: number) => number;
export const __wbg_get_registration_source_xy: (a: number) => [number, number];
export const __wbg_get_registration_translation_error: (a: number) => number;
export const __wbg_registration_free: (a: number, b: number) => void;
export const __wbg_scene_free: (a: number, b: number) => void;
export const __wbg_set_registration_errors: (a: number, b: number, c: number) => void;
export const __wbg_set_registration_final_overlap: (a: number, b: number) => void;
export const __wbg_set_registration_initial_overlap: (a: number, b: number) => void;
export const __wbg_set_registration_iterations: (a: number, b: number) => void;
export const __wbg_set_registration_rotation_error_deg: (a: number, b: number) => void;
export const __wbg_set_registration_source_xy: (a: number, b: number, c: number) => void;
export const __wbg_set_registration_translation_error: (a: number, b: number) => void;
export const scene_new: (a: number, b: number) => [number, number, number];
export const scene_overlap: (a: number, b: number, c: number, d: number) => number;
export const scene_register: (a: number, b: number, c: number, d: number) => [number, number, number];
export const scene_resolution: (a: number) => number;
export const scene_source_xy: (a: number, b: number, c: number, d: number) => [number, number];
export const scene_target_xy: (a: number) => [number, number];
export const scene_voxels: (a: number) => number;
export const tukey_weights: (a: number, b: number, c: number, d: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
