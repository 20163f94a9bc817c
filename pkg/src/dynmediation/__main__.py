from dynmediation.harness.cli import main

raise SystemExit(main())
