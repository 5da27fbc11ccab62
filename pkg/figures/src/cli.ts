#!/usr/bin/env node
import { main } from "./args.js";

process.exit(main(process.argv.slice(2)));
