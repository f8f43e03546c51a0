/** DOM-side helper types kept out of the node-tested modules. */

export type { StreamFrame } from './types.js';

export interface TraceFilterForm {
  decision: HTMLSelectElement;
  tool: HTMLSelectElement;
  since: HTMLInputElement;
  until: HTMLInputElement;
}
