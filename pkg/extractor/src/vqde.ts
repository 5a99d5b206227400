/**
 * VQDE binary table I/O, matching the consumer's layout byte for byte:
 * magic "VQDE" | u32 version=1 | u32 dim | u64 rows | u16 name len | name |
 * rows of (u16 id len | id | dim float32), all little-endian.
 */

import { readFileSync, writeFileSync } from 'node:fs';

const MAGIC = 'VQDE';
const VERSION = 1;

export interface EmbeddingRow {
  id: string;
  vector: Float32Array;
}

export interface EmbeddingTable {
  backendName: string;
  dim: number;
  rows: EmbeddingRow[];
}

export class VqdeFormatError extends Error {}

export function tableBytes(table: EmbeddingTable): Buffer {
  const nameBytes = Buffer.from(table.backendName, 'utf-8');
  const parts: Buffer[] = [];
  const header = Buffer.alloc(4 + 4 + 4 + 8 + 2);
  header.write(MAGIC, 0, 'ascii');
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt32LE(table.dim, 8);
  header.writeBigUInt64LE(BigInt(table.rows.length), 12);
  header.writeUInt16LE(nameBytes.length, 20);
  parts.push(header, nameBytes);
  const seen = new Set<string>();
  for (const row of table.rows) {
    if (row.vector.length !== table.dim) {
      throw new VqdeFormatError(`row ${row.id} has length ${row.vector.length}, expected ${table.dim}`);
    }
    if (seen.has(row.id)) throw new VqdeFormatError(`duplicate id ${row.id}`);
    seen.add(row.id);
    const idBytes = Buffer.from(row.id, 'utf-8');
    const lenBuf = Buffer.alloc(2);
    lenBuf.writeUInt16LE(idBytes.length, 0);
    // copy so byte order stays little-endian regardless of platform
    const vecBuf = Buffer.alloc(table.dim * 4);
    for (let i = 0; i < table.dim; i++) vecBuf.writeFloatLE(row.vector[i], i * 4);
    parts.push(lenBuf, idBytes, vecBuf);
  }
  return Buffer.concat(parts);
}

export function writeTable(table: EmbeddingTable, path: string): void {
  writeFileSync(path, tableBytes(table));
}

export function readTable(path: string): EmbeddingTable {
  const buf = readFileSync(path);
  if (buf.length < 22 || buf.toString('ascii', 0, 4) !== MAGIC) {
    throw new VqdeFormatError('bad magic');
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) throw new VqdeFormatError(`unsupported version ${version}`);
  const dim = buf.readUInt32LE(8);
  const rowCount = Number(buf.readBigUInt64LE(12));
  const nameLen = buf.readUInt16LE(20);
  let offset = 22;
  const backendName = buf.toString('utf-8', offset, offset + nameLen);
  offset += nameLen;
  const rows: EmbeddingRow[] = [];
  for (let r = 0; r < rowCount; r++) {
    if (offset + 2 > buf.length) throw new VqdeFormatError(`truncated at row ${r}`);
    const idLen = buf.readUInt16LE(offset);
    offset += 2;
    if (offset + idLen + dim * 4 > buf.length) throw new VqdeFormatError(`truncated at row ${r}`);
    const id = buf.toString('utf-8', offset, offset + idLen);
    offset += idLen;
    const vector = new Float32Array(dim);
    for (let i = 0; i < dim; i++) vector[i] = buf.readFloatLE(offset + i * 4);
    offset += dim * 4;
    rows.push({ id, vector });
  }
  if (offset !== buf.length) throw new VqdeFormatError('trailing bytes after last row');
  return { backendName, dim, rows };
}
