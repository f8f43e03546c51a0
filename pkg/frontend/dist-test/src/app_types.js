/** DOM-side helper types kept out of the node-tested modules. */
export {};
