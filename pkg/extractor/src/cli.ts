#!/usr/bin/env node
/**
 * Extraction CLI: `vqd-extract extract --audio-dir clips/ --backend rawnet3
 * --out clips.vqde --manifest-out clips.csv`.
 */

import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { runExtraction } from './extract.js';
import { BACKEND_DIMS, Pooling } from './featurize.js';
import { CATEGORIES, SPLITS } from './manifest.js';

async function main(): Promise<number> {
  const parser = yargs(hideBin(process.argv))
    .scriptName('vqd-extract')
    .command(
      'extract',
      'extract pooled embeddings from an audio directory',
      (y) =>
        y
          .option('audio-dir', { type: 'string', demandOption: true })
          .option('backend', {
            type: 'string',
            demandOption: true,
            choices: Object.keys(BACKEND_DIMS),
          })
          .option('out', { type: 'string', demandOption: true, describe: 'VQDE output path' })
          .option('manifest-out', { type: 'string', describe: 'manifest CSV output path' })
          .option('transcripts', { type: 'string', describe: 'JSON file of id -> transcript' })
          .option('pooling', { type: 'string', choices: ['mean', 'max'], default: 'mean' })
          .option('category', { type: 'string', choices: [...CATEGORIES], default: 'spontaneous' })
          .option('split', { type: 'string', choices: [...SPLITS], default: 'test' })
          .option('label', { type: 'string', describe: 'backend name stored in the table header' }),
      async (argv) => {
        const summary = await runExtraction({
          audioDir: argv['audio-dir'] as string,
          backend: argv.backend as string,
          outputPath: argv.out as string,
          manifestPath: argv['manifest-out'] as string | undefined,
          transcriptPath: argv.transcripts as string | undefined,
          pooling: argv.pooling as Pooling,
          category: argv.category as (typeof CATEGORIES)[number],
          split: argv.split as (typeof SPLITS)[number],
          label: argv.label as string | undefined,
        });
        console.log(JSON.stringify(summary, null, 1));
      },
    )
    .command('backends', 'list known backends and their embedding widths', {}, () => {
      console.log(JSON.stringify(BACKEND_DIMS, null, 1));
    })
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      console.error(`error: ${msg ?? err?.message}`);
      process.exit(err ? 2 : 1);
    });
  await parser.parseAsync();
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(`error: ${err?.message ?? err}`);
    process.exit(2);
  },
);
