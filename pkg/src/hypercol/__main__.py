from hypercol.cli import main

raise SystemExit(main())
